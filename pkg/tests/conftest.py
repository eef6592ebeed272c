import numpy as np
import pytest

from lcirsp.synth import ScenarioConfig, generate_corpus
from lcirsp.trajectory_io import Trajectory


def make_trajectory(track_id=1, n=40, x0=0.0, y0=6.0, vx=1.0, vy=0.0,
                    lane_id=1, frame_rate=30.0, start_frame=0, length=15.0):
    """Straight-line track with constant per-frame velocity (ft/frame)."""
    t = np.arange(n, dtype=np.float64)
    cx, cy = x0 + vx * t, y0 + vy * t
    theta = np.arctan2(vy, vx)
    hx, hy = cx + length / 2 * np.cos(theta), cy + length / 2 * np.sin(theta)
    tx, ty = cx - length / 2 * np.cos(theta), cy - length / 2 * np.sin(theta)
    return Trajectory(
        track_id=track_id,
        frames=np.arange(start_frame, start_frame + n, dtype=np.int64),
        head=np.stack([hx, hy], axis=1),
        tail=np.stack([tx, ty], axis=1),
        center=np.stack([cx, cy], axis=1),
        lane_ids=np.full(n, lane_id, dtype=np.int64),
        frame_rate=frame_rate,
    )


@pytest.fixture(scope="session")
def small_noiseless_corpus():
    cfg = ScenarioConfig(n_lk=6, n_llc=4, n_rlc=4, seed=7, noise_std=0.0,
                         lc_duration=8.0)
    trajectories, geometry, gt = generate_corpus(cfg)
    return cfg, trajectories, geometry, gt


@pytest.fixture(scope="session")
def small_noisy_corpus():
    cfg = ScenarioConfig(n_lk=6, n_llc=4, n_rlc=4, seed=9, noise_std=0.15,
                         lc_duration=8.0)
    trajectories, geometry, gt = generate_corpus(cfg)
    return cfg, trajectories, geometry, gt
