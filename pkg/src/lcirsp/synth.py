"""Synthetic multi-lane trajectory corpora with planted lane-change ground truth.

Vehicles share one straight road segment with staggered entry frames so they
serve as each other's neighbors. Positions are sampled from closed-form
profiles (no integration error): lane keepers drive at constant or gently
jittered speed, lane changers follow a raised-cosine lateral ramp across one
lane. Ground-truth boundary-touch frames come from a forward scan of the
noiseless corner trajectory, independent of the event detector's
backward-from-lane-change search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig
from .labeling import LLC, RLC, Lane, LaneGeometry
from .trajectory_io import Trajectory


@dataclass
class ScenarioConfig:
    n_lanes: int = 4
    lane_width: float = 12.0            # feet
    n_lk: int = 20
    n_llc: int = 10
    n_rlc: int = 10
    speed_range: tuple = (40.0, 80.0)   # ft/s
    lc_duration: float = 5.0            # seconds
    noise_std: float = 0.15             # feet
    seed: int = 0
    frame_rate: float = 30.0
    vehicle_length: float = 15.0
    vehicle_width: float = 6.0
    speed_jitter: float = 0.02          # relative amplitude of the slow speed wobble
    pre_frames: tuple = (270, 330)      # LK run-up before the maneuver starts
    post_frames: tuple = (160, 220)     # LK tail after the maneuver ends
    lk_frames: tuple = (380, 470)       # total length of lane-keeping tracks
    entry_stagger: int = 600            # max random entry frame
    x_span: float = 3000.0              # longitudinal spawn range, feet
    settle_depth: tuple | None = None   # lateral settle distance past the boundary
                                        # (None: settle at target lane center +-1)

    def validate(self):
        if self.n_lanes < 2:
            raise InvalidConfig("n_lanes must be >= 2")
        if self.lc_duration <= 0:
            raise InvalidConfig("lc_duration must be > 0")
        if self.noise_std < 0:
            raise InvalidConfig("noise_std must be >= 0")
        if self.vehicle_width >= self.lane_width:
            raise InvalidConfig("vehicle_width must be smaller than lane_width")
        if min(self.n_lk, self.n_llc, self.n_rlc) < 0:
            raise InvalidConfig("vehicle counts must be >= 0")


@dataclass(frozen=True)
class PlantedEvent:
    track_id: int
    direction: str
    boundary_touch_frame: int


@dataclass
class GroundTruth:
    events: list = field(default_factory=list)
    vehicle_width: float = 6.0
    classes: dict = field(default_factory=dict)   # track_id -> LK/LLC/RLC

    def to_json(self):
        return {
            "vehicle_width": self.vehicle_width,
            "classes": {str(k): v for k, v in sorted(self.classes.items())},
            "events": [
                {
                    "track_id": ev.track_id,
                    "direction": ev.direction,
                    "boundary_touch_frame": ev.boundary_touch_frame,
                }
                for ev in self.events
            ],
        }

    @classmethod
    def from_json(cls, doc):
        gt = cls(vehicle_width=float(doc["vehicle_width"]))
        gt.classes = {int(k): v for k, v in doc["classes"].items()}
        gt.events = [
            PlantedEvent(int(d["track_id"]), d["direction"], int(d["boundary_touch_frame"]))
            for d in doc["events"]
        ]
        return gt

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def make_lane_geometry(n_lanes, lane_width, direction=1):
    """Lane i in 1..n centered at (i - 0.5) * width; +y is left for +x travel."""
    lanes = []
    for i in range(1, n_lanes + 1):
        lanes.append(
            Lane(
                lane_id=i,
                left_boundary_y=i * lane_width,
                right_boundary_y=(i - 1) * lane_width,
                direction=direction,
            )
        )
    return LaneGeometry(lanes)


def _longitudinal_profile(n_frames, x0, v0, jitter, period, phase, fps):
    """Closed-form x(t) and vx(t) with a slow sinusoidal speed wobble."""
    t = np.arange(n_frames, dtype=np.float64)
    if jitter == 0.0:
        x = x0 + v0 * t / fps
        vx = np.full(n_frames, v0)
    else:
        w = 2.0 * math.pi / period
        x = x0 + v0 * t / fps + v0 * jitter / (w * fps) * (np.cos(phase) - np.cos(w * t + phase))
        vx = v0 * (1.0 + jitter * np.sin(w * t + phase))
    return x, vx


def _lateral_profile(n_frames, y0, dy, onset, dur_frames):
    """Raised-cosine ramp y0 -> y0+dy over [onset, onset+dur); vy in ft/frame."""
    t = np.arange(n_frames, dtype=np.float64)
    tau = np.clip((t - onset) / dur_frames, 0.0, 1.0)
    y = y0 + dy * (1.0 - np.cos(math.pi * tau)) / 2.0
    vy = np.where(
        (tau > 0.0) & (tau < 1.0),
        dy * math.pi * np.sin(math.pi * tau) / (2.0 * dur_frames),
        0.0,
    )
    return y, vy


def _build_trajectory(track_id, start_frame, x, y, vx_fps, vy_fpf, cfg, geometry, rng):
    """Assemble a Trajectory from center profiles; heading from the analytic
    velocity direction; independent Gaussian noise on every emitted point."""
    n = len(x)
    theta = np.arctan2(vy_fpf * cfg.frame_rate, vx_fps)
    half = 0.5 * cfg.vehicle_length
    head = np.stack([x + half * np.cos(theta), y + half * np.sin(theta)], axis=1)
    tail = np.stack([x - half * np.cos(theta), y - half * np.sin(theta)], axis=1)
    center = np.stack([x, y], axis=1)
    lane_ids = np.clip(
        np.floor(y / cfg.lane_width).astype(np.int64) + 1, 1, cfg.n_lanes
    )
    if cfg.noise_std > 0:
        head = head + rng.normal(0.0, cfg.noise_std, head.shape)
        tail = tail + rng.normal(0.0, cfg.noise_std, tail.shape)
        center = center + rng.normal(0.0, cfg.noise_std, center.shape)
    return Trajectory(
        track_id=track_id,
        frames=np.arange(start_frame, start_frame + n, dtype=np.int64),
        head=head,
        tail=tail,
        center=center,
        lane_ids=lane_ids,
        frame_rate=cfg.frame_rate,
    )


def _touch_frame(head_y_clean, boundary_y, toward, half_width, onset):
    """First frame >= onset where the front corner reaches the boundary."""
    corner = head_y_clean + toward * half_width
    beyond = toward * (corner - boundary_y) >= 0.0
    for k in range(onset, len(corner)):
        if beyond[k]:
            return k
    return None


def generate_corpus(config: ScenarioConfig):
    """Returns (trajectories, lane_geometry, ground_truth)."""
    cfg = config
    cfg.validate()
    geometry = make_lane_geometry(cfg.n_lanes, cfg.lane_width)
    root = np.random.SeedSequence(cfg.seed)
    n_total = cfg.n_lk + cfg.n_llc + cfg.n_rlc
    seeds = root.spawn(n_total)

    gt = GroundTruth(vehicle_width=cfg.vehicle_width)
    trajectories = []
    track_id = 0
    specs = [("LK", None)] * cfg.n_lk + [(LLC, +1)] * cfg.n_llc + [(RLC, -1)] * cfg.n_rlc
    for (klass, lane_step), seed in zip(specs, seeds):
        track_id += 1
        rng = np.random.Generator(np.random.PCG64(seed))
        v0 = rng.uniform(*cfg.speed_range)
        x0 = rng.uniform(0.0, cfg.x_span)
        start_frame = int(rng.integers(0, cfg.entry_stagger + 1))
        period = rng.uniform(300.0, 600.0)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        offset = rng.uniform(-1.0, 1.0)

        if klass == "LK":
            n_frames = int(rng.integers(cfg.lk_frames[0], cfg.lk_frames[1] + 1))
            lane = int(rng.integers(1, cfg.n_lanes + 1))
            x, vx = _longitudinal_profile(
                n_frames, x0, v0, cfg.speed_jitter, period, phase, cfg.frame_rate
            )
            y0 = (lane - 0.5) * cfg.lane_width + offset
            y = np.full(n_frames, y0)
            vy = np.zeros(n_frames)
        else:
            dur = int(round(cfg.lc_duration * cfg.frame_rate))
            pre = int(rng.integers(cfg.pre_frames[0], cfg.pre_frames[1] + 1))
            post = int(rng.integers(cfg.post_frames[0], cfg.post_frames[1] + 1))
            n_frames = pre + dur + post
            if lane_step > 0:
                lane = int(rng.integers(1, cfg.n_lanes))       # needs a left neighbor
            else:
                lane = int(rng.integers(2, cfg.n_lanes + 1))   # needs a right neighbor
            x, vx = _longitudinal_profile(
                n_frames, x0, v0, cfg.speed_jitter, period, phase, cfg.frame_rate
            )
            if cfg.settle_depth is None:
                y0 = (lane - 0.5) * cfg.lane_width + offset
                y_target = (lane + lane_step - 0.5) * cfg.lane_width + rng.uniform(-1.0, 1.0)
            else:
                # start biased away from the boundary, settle just past it, so
                # the corner touch lands near the lateral-velocity peak
                y0 = (lane - 0.5) * cfg.lane_width - lane_step * rng.uniform(0.0, 1.0)
                src = geometry.lane(lane)
                boundary = src.left_boundary_y if lane_step > 0 else src.right_boundary_y
                y_target = boundary + lane_step * rng.uniform(*cfg.settle_depth)
            y, vy = _lateral_profile(n_frames, y0, y_target - y0, pre, dur)

        traj = _build_trajectory(
            track_id, start_frame, x, y, vx, vy, cfg, geometry, rng
        )
        trajectories.append(traj)
        gt.classes[track_id] = klass

        if klass != "LK":
            src = geometry.lane(lane)
            boundary_y = src.left_boundary_y if klass == LLC else src.right_boundary_y
            toward = 1.0 if klass == LLC else -1.0
            theta = np.arctan2(vy * cfg.frame_rate, vx)
            head_y_clean = y + 0.5 * cfg.vehicle_length * np.sin(theta)
            touch = _touch_frame(
                head_y_clean, boundary_y, toward, 0.5 * cfg.vehicle_width, pre
            )
            if touch is None:
                raise InvalidConfig(
                    f"planted maneuver for track {track_id} never touches the boundary"
                )
            gt.events.append(
                PlantedEvent(track_id, klass, int(traj.frames[touch]))
            )

    return trajectories, geometry, gt


def corpus_stats(trajectories, ground_truth: GroundTruth | None = None,
                 window_length=150, max_step=8):
    """Per-class counts, mean speeds, and window counts used by acceptance tests."""
    classes = ground_truth.classes if ground_truth is not None else {}
    counts = {"LK": 0, LLC: 0, RLC: 0}
    speeds = []
    window_count = 0
    for traj in trajectories:
        klass = classes.get(traj.track_id)
        if klass is None:
            klass = "LK" if len(np.unique(traj.lane_ids)) == 1 else "LC"
            counts.setdefault(klass, 0)
        counts[klass] += 1
        if len(traj) >= 2:
            dt = (traj.frames[-1] - traj.frames[0]) / traj.frame_rate
            if dt > 0:
                speeds.append(
                    float(np.hypot(*(traj.center[-1] - traj.center[0])) / dt)
                )
        usable = len(traj) - (2 * max_step + 2)
        window_count += max(0, usable - window_length + 1)
    return {
        "n_trajectories": len(trajectories),
        "class_counts": counts,
        "mean_speed": float(np.mean(speeds)) if speeds else 0.0,
        "window_count": window_count,
        "window_length": window_length,
    }
