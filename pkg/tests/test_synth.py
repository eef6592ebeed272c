import numpy as np
import pytest

from lcirsp.errors import InvalidConfig
from lcirsp.kinematics import compute_indicators
from lcirsp.labeling import LLC, RLC, detect_lc_events
from lcirsp.synth import ScenarioConfig, corpus_stats, generate_corpus
from lcirsp.trajectory_io import clean_trajectories, remove_frame_gaps


class TestGenerateCorpus:
    def test_counts_and_geometry(self, small_noiseless_corpus):
        cfg, trajs, geo, gt = small_noiseless_corpus
        assert len(trajs) == cfg.n_lk + cfg.n_llc + cfg.n_rlc
        assert len(gt.events) == cfg.n_llc + cfg.n_rlc
        assert len(geo.lanes) == cfg.n_lanes
        assert sorted(gt.classes.values()).count("LK") == cfg.n_lk

    def test_no_frame_gaps(self, small_noiseless_corpus):
        _, trajs, _, _ = small_noiseless_corpus
        assert all(remove_frame_gaps(t) for t in trajs)

    def test_noiseless_touch_frames_recovered_exactly(self, small_noiseless_corpus):
        cfg, trajs, geo, gt = small_noiseless_corpus
        planted = {ev.track_id: ev for ev in gt.events}
        for traj in trajs:
            events = detect_lc_events(traj, geo, vehicle_width=cfg.vehicle_width)
            if traj.track_id in planted:
                assert len(events) == 1
                assert events[0].lc_start_frame == planted[traj.track_id].boundary_touch_frame
                assert events[0].direction == planted[traj.track_id].direction
            else:
                assert events == []

    def test_zero_lc_vehicles_no_events(self):
        cfg = ScenarioConfig(n_lk=4, n_llc=0, n_rlc=0, seed=1, noise_std=0.0)
        trajs, geo, gt = generate_corpus(cfg)
        assert gt.events == []
        for traj in trajs:
            assert detect_lc_events(traj, geo) == []

    def test_same_seed_bit_identical(self):
        cfg = ScenarioConfig(n_lk=3, n_llc=2, n_rlc=2, seed=5)
        a, _, gta = generate_corpus(cfg)
        b, _, gtb = generate_corpus(ScenarioConfig(n_lk=3, n_llc=2, n_rlc=2, seed=5))
        for ta, tb in zip(a, b):
            np.testing.assert_array_equal(ta.center, tb.center)
            np.testing.assert_array_equal(ta.head, tb.head)
            np.testing.assert_array_equal(ta.frames, tb.frames)
        assert gta.events == gtb.events

    def test_different_seed_differs(self):
        a, _, _ = generate_corpus(ScenarioConfig(n_lk=2, n_llc=1, n_rlc=1, seed=1))
        b, _, _ = generate_corpus(ScenarioConfig(n_lk=2, n_llc=1, n_rlc=1, seed=2))
        assert not np.array_equal(a[0].center, b[0].center)

    def test_invalid_configs(self):
        with pytest.raises(InvalidConfig):
            generate_corpus(ScenarioConfig(n_lanes=1))
        with pytest.raises(InvalidConfig):
            generate_corpus(ScenarioConfig(lc_duration=0.0))
        with pytest.raises(InvalidConfig):
            generate_corpus(ScenarioConfig(noise_std=-0.1))
        with pytest.raises(InvalidConfig):
            generate_corpus(ScenarioConfig(vehicle_width=13.0))

    def test_constant_speed_vx_recovered(self):
        # zero jitter, zero noise: kinematics must recover v_x to 1e-9
        cfg = ScenarioConfig(n_lk=3, n_llc=0, n_rlc=0, seed=2, noise_std=0.0,
                             speed_jitter=0.0)
        trajs, _, _ = generate_corpus(cfg)
        for traj in trajs:
            v_true = (traj.center[1, 0] - traj.center[0, 0]) * traj.frame_rate
            _, states = compute_indicators(traj)
            for s in states[:: max(1, len(states) // 10)]:
                assert s.vx == pytest.approx(v_true, abs=1e-9)
                assert s.vy == pytest.approx(0.0, abs=1e-9)

    def test_noisy_touch_within_3_frames(self, small_noisy_corpus):
        cfg, trajs, geo, gt = small_noisy_corpus
        cleaned, _ = clean_trajectories(trajs)
        planted = {ev.track_id: ev for ev in gt.events}
        by_id = {t.track_id: t for t in cleaned}
        for tid, ev in planted.items():
            events = detect_lc_events(by_id[tid], geo, vehicle_width=cfg.vehicle_width)
            assert len(events) >= 1
            nearest = min(events, key=lambda e: abs(e.lc_start_frame - ev.boundary_touch_frame))
            assert abs(nearest.lc_start_frame - ev.boundary_touch_frame) <= 3
            assert nearest.direction == ev.direction

    def test_lc_direction_lanes_valid(self, small_noiseless_corpus):
        cfg, trajs, geo, gt = small_noiseless_corpus
        by_id = {t.track_id: t for t in trajs}
        for ev in gt.events:
            lanes = by_id[ev.track_id].lane_ids
            first, last = lanes[0], lanes[-1]
            if ev.direction == LLC:
                assert last == first + 1
            else:
                assert last == first - 1

    def test_ground_truth_json_roundtrip(self, tmp_path, small_noiseless_corpus):
        _, _, _, gt = small_noiseless_corpus
        path = tmp_path / "gt.json"
        gt.save(path)
        from lcirsp.synth import GroundTruth

        loaded = GroundTruth.load(path)
        assert loaded.events == gt.events
        assert loaded.classes == gt.classes
        assert loaded.vehicle_width == gt.vehicle_width


class TestCorpusStats:
    def test_empty(self):
        stats = corpus_stats([])
        assert stats["n_trajectories"] == 0
        assert stats["window_count"] == 0

    def test_window_count_matches_enumeration(self, small_noiseless_corpus):
        cfg, trajs, geo, gt = small_noiseless_corpus
        stats = corpus_stats(trajs, gt, window_length=150)
        oracle = 0
        for traj in trajs:
            frames, _ = compute_indicators(traj)
            oracle += max(0, len(frames) - 150 + 1)
        assert stats["window_count"] == oracle

    def test_mean_speed_in_sampled_range(self, small_noiseless_corpus):
        cfg, trajs, _, gt = small_noiseless_corpus
        stats = corpus_stats(trajs, gt)
        assert cfg.speed_range[0] * 0.95 <= stats["mean_speed"] <= cfg.speed_range[1] * 1.05

    def test_class_counts(self, small_noiseless_corpus):
        cfg, trajs, _, gt = small_noiseless_corpus
        stats = corpus_stats(trajs, gt)
        assert stats["class_counts"] == {"LK": cfg.n_lk, LLC: cfg.n_llc, RLC: cfg.n_rlc}
