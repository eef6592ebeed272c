"""Neighbor assignment, headways and the 54-channel feature frames/windows.

Per frame the ego sees six slots - preceding/following in its own lane (P, F)
and in the adjacent left/right lanes (LP, LF, RP, RF). A feature frame is
7 vehicles x 6 indicators, then the six space headways, then the six
missing-trajectory flags, in a fixed documented order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EgoNotInSnapshot, InsufficientHorizon, TooShort
from .kinematics import (
    INDICATOR_NAMES,
    NormalizationScaler,
    compute_indicators,
    indicator_matrix,
)
from .labeling import CLASS_ORDER, LK, balance_classes, detect_lc_events, extract_windows

log = logging.getLogger(__name__)

SLOT_NAMES = ("P", "F", "LP", "LF", "RP", "RF")
VEHICLE_ORDER = ("E",) + SLOT_NAMES

FEATURE_DIM = 54

#: canonical order of the 54 channels
CHANNEL_NAMES = tuple(
    [f"{veh}_{ind}" for veh in VEHICLE_ORDER for ind in INDICATOR_NAMES]
    + [f"dw_{slot}" for slot in SLOT_NAMES]
    + [f"val_{slot}" for slot in SLOT_NAMES]
)

ABSENT = None


@dataclass(frozen=True)
class NeighborInfo:
    track_id: int
    indicators: np.ndarray   # the six kinematic indicators
    x: float                 # longitudinal position (feet)


@dataclass
class NeighborSet:
    slots: dict = field(default_factory=lambda: {s: ABSENT for s in SLOT_NAMES})

    def __getitem__(self, slot):
        return self.slots[slot]

    def __setitem__(self, slot, value):
        self.slots[slot] = value


class FrameIndex:
    """Frame -> vehicles view over indicator-computed trajectories.

    Only frames inside a vehicle's indicator-valid range appear, so a
    neighbor near its own track boundary is treated as unrecorded, matching
    the camera-coverage semantics of the missing flags. After `finalize`,
    per-frame per-lane views sorted by longitudinal position make neighbor
    lookups O(log n).
    """

    def __init__(self, geometry):
        self.geometry = geometry
        self.indicator_frames: dict[int, np.ndarray] = {}
        self.indicator_values: dict[int, np.ndarray] = {}
        self._pending = []
        self._lane_views = None   # frame -> {lane: (xs, ids, values)}

    def add_trajectory(self, traj, frames, states):
        values = indicator_matrix(states)
        self.indicator_frames[traj.track_id] = frames
        self.indicator_values[traj.track_id] = values
        i0 = int(np.searchsorted(traj.frames, frames[0]))
        sl = slice(i0, i0 + len(frames))
        self._pending.append(
            (traj.track_id, frames, traj.lane_ids[sl], traj.center[sl, 0], values)
        )
        self._lane_views = None

    def finalize(self):
        if self._lane_views is not None:
            return
        buckets: dict[tuple, list] = {}
        for tid, frames, lanes, xs, values in self._pending:
            for j in range(len(frames)):
                buckets.setdefault((int(frames[j]), int(lanes[j])), []).append(
                    (float(xs[j]), tid, values[j])
                )
        views: dict[int, dict] = {}
        for (frame, lane), rows in buckets.items():
            rows.sort(key=lambda r: (r[0], r[1]))
            views.setdefault(frame, {})[lane] = (
                np.array([r[0] for r in rows]),
                np.array([r[1] for r in rows], dtype=np.int64),
                np.stack([r[2] for r in rows]),
            )
        self._lane_views = views

    def lane_view(self, frame, lane):
        self.finalize()
        return self._lane_views.get(int(frame), {}).get(int(lane))

    def snapshot(self, frame):
        """{track_id: (lane, x, indicators)} - the slow, test-friendly view."""
        self.finalize()
        out = {}
        for lane, (xs, ids, values) in self._lane_views.get(int(frame), {}).items():
            for k in range(len(ids)):
                out[int(ids[k])] = (lane, float(xs[k]), values[k])
        return out

    def neighbors(self, frame, ego_track_id, ego_lane, ego_x):
        """Fast NeighborSet lookup equivalent to find_neighbors on a snapshot."""
        left_id, right_id = self.geometry.adjacent(ego_lane)
        travel = self.geometry.lane(ego_lane).direction
        out = NeighborSet()

        def fill(lane, slot_p, slot_f, skip_ego):
            if lane is None:
                return
            view = self.lane_view(frame, lane)
            if view is None:
                return
            xs, ids, values = view
            # relative coordinate in the direction of travel
            if travel >= 0:
                idx = int(np.searchsorted(xs, ego_x, side="left"))
                k = idx
                while k < len(ids):
                    if not (skip_ego and ids[k] == ego_track_id):
                        out[slot_p] = NeighborInfo(int(ids[k]), values[k], float(xs[k]))
                        break
                    k += 1
                k = idx - 1
                while k >= 0:
                    if not (skip_ego and ids[k] == ego_track_id):
                        out[slot_f] = NeighborInfo(int(ids[k]), values[k], float(xs[k]))
                        break
                    k -= 1
            else:
                idx = int(np.searchsorted(xs, ego_x, side="right"))
                k = idx - 1
                while k >= 0:
                    if not (skip_ego and ids[k] == ego_track_id):
                        out[slot_p] = NeighborInfo(int(ids[k]), values[k], float(xs[k]))
                        break
                    k -= 1
                k = idx
                while k < len(ids):
                    if not (skip_ego and ids[k] == ego_track_id):
                        out[slot_f] = NeighborInfo(int(ids[k]), values[k], float(xs[k]))
                        break
                    k += 1

        fill(ego_lane, "P", "F", True)
        fill(left_id, "LP", "LF", True)
        fill(right_id, "RP", "RF", True)
        return out


def find_neighbors(snapshot, ego_track_id, geometry, ego_lane=None, ego_x=None):
    """Nearest qualifying vehicle per slot; ties at equal |gap| go to the
    preceding slot. Slots stay ABSENT when no vehicle qualifies or the
    adjacent lane does not exist."""
    if ego_lane is None or ego_x is None:
        if ego_track_id not in snapshot:
            raise EgoNotInSnapshot(f"track {ego_track_id} not in snapshot")
        ego_lane, ego_x, _ = snapshot[ego_track_id]
    left_id, right_id = geometry.adjacent(ego_lane)
    lane_of = {"P": ego_lane, "F": ego_lane, "LP": left_id, "LF": left_id,
               "RP": right_id, "RF": right_id}
    travel = geometry.lane(ego_lane).direction

    best = NeighborSet()
    best_gap = {s: np.inf for s in SLOT_NAMES}
    for tid, (lane, x, indicators) in snapshot.items():
        if tid == ego_track_id:
            continue
        ahead = (x - ego_x) * travel
        for slot in SLOT_NAMES:
            if lane_of[slot] is None or lane != lane_of[slot]:
                continue
            is_preceding = slot in ("P", "LP", "RP")
            if is_preceding and ahead < 0:
                continue
            if not is_preceding and ahead > 0:
                continue
            if not is_preceding and ahead == 0:
                continue  # exact tie belongs to the preceding slot
            gap = abs(ahead)
            if gap < best_gap[slot] or (gap == best_gap[slot] and tid < getattr(best[slot], "track_id", np.inf)):
                best_gap[slot] = gap
                best[slot] = NeighborInfo(tid, indicators, x)
    return best


def compute_headways(ego_x, neighbors: NeighborSet):
    """|x_other - x_ego| per slot in SLOT_NAMES order; 0 for ABSENT slots."""
    return np.array(
        [abs(neighbors[s].x - ego_x) if neighbors[s] is not ABSENT else 0.0
         for s in SLOT_NAMES]
    )


def assemble_feature_frame(ego_indicators, neighbors: NeighborSet, ego_x):
    """The 54-value frame: [E,P,F,LP,LF,RP,RF] x 6 indicators, dw per slot,
    then validity flags (1 = missing, with zeroed indicators and headway)."""
    parts = [np.asarray(ego_indicators, dtype=np.float64)]
    flags = np.zeros(len(SLOT_NAMES))
    for i, slot in enumerate(SLOT_NAMES):
        nb = neighbors[slot]
        if nb is ABSENT:
            parts.append(np.zeros(6))
            flags[i] = 1.0
        else:
            parts.append(np.asarray(nb.indicators, dtype=np.float64))
    parts.append(compute_headways(ego_x, neighbors))
    parts.append(flags)
    frame = np.concatenate(parts)
    assert frame.shape == (FEATURE_DIM,)
    return frame


def feature_track(index: FrameIndex, traj, geometry):
    """(frames, features): the per-frame 54-channel rows of one ego track."""
    frames = index.indicator_frames[traj.track_id]
    values = index.indicator_values[traj.track_id]
    rows = np.zeros((len(frames), FEATURE_DIM))
    i0 = int(np.searchsorted(traj.frames, frames[0])) if len(frames) else 0
    for j, f in enumerate(frames):
        i = i0 + j
        ego_x = float(traj.center[i, 0])
        neighbors = index.neighbors(
            f, traj.track_id, int(traj.lane_ids[i]), ego_x
        )
        rows[j] = assemble_feature_frame(values[j], neighbors, ego_x)
    return frames, rows


@dataclass
class WindowRecord:
    track_id: int
    start_frame: int
    end_frame: int
    label: str


@dataclass
class IrDataset:
    """Class-balanced, normalized intention-recognition windows.

    train_x/test_x: (n, L, 54); train_y/test_y: int class indices into
    CLASS_ORDER. The scaler was fit on the training side only.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    scaler: NormalizationScaler
    train_records: list
    test_records: list
    label_map: tuple = CLASS_ORDER
    seed: int = 0

    @property
    def windows(self):
        return np.concatenate([self.train_x, self.test_x]) if len(self.test_x) else self.train_x

    @property
    def labels(self):
        return [self.label_map[i] for i in np.concatenate([self.train_y, self.test_y])]


@dataclass
class SpDataset:
    """Status-prediction windows (LC-labeled only) with 2-step bin targets.

    train_t/test_t: (n, n_bins, 6) normalized future-indicator means. The
    target scaler is fit on training targets; input scaler on training
    windows.
    """

    train_x: np.ndarray
    train_t: np.ndarray
    test_x: np.ndarray
    test_t: np.ndarray
    scaler: NormalizationScaler
    target_scaler: NormalizationScaler
    train_records: list
    test_records: list
    n_bins: int = 2
    seed: int = 0


def _normalize_windows(x, scaler):
    flat = x.reshape(-1, FEATURE_DIM)
    out = scaler.transform(flat, clamp=True, degenerate_fill=0.0)
    return out.reshape(x.shape)


def _fit_scaler(train_x):
    scaler = NormalizationScaler.fit(
        train_x.reshape(-1, FEATURE_DIM), channel_names=CHANNEL_NAMES
    )
    degen = scaler.degenerate_channels()
    if len(degen):
        log.info(
            "degenerate feature channels (constant on train): %s - normalized to 0",
            ", ".join(CHANNEL_NAMES[i] for i in degen),
        )
    return scaler


def build_feature_index(trajectories, geometry, max_step=8, same_frame_axis=False):
    """Compute indicators for every track and assemble the shared FrameIndex.

    Tracks too short for the indicator stencil are skipped with a log line.
    Returns (index, kept_trajectories).
    """
    index = FrameIndex(geometry)
    kept = []
    for traj in trajectories:
        try:
            frames, states = compute_indicators(traj, max_step, same_frame_axis)
        except TooShort:
            log.info("track %s too short for indicators; skipped", traj.track_id)
            continue
        if len(frames) == 0:
            continue
        index.add_trajectory(traj, frames, states)
        kept.append(traj)
    return index, kept


def split_track_ids(track_ids, ratio, seed):
    """Deterministic trajectory-level split of ids into (train, test) sets."""
    from .training import _split_ids

    return _split_ids(track_ids, ratio, seed)


def build_ir_dataset(trajectories, geometry, length, stride=1, seed=0,
                     split_ratio=0.8, split_unit="trajectory", lk_count=None,
                     vehicle_width=None, balance=True, events_by_track=None,
                     max_step=8):
    """Windows + labels + scaler for intention recognition.

    Pipeline: indicators -> feature tracks -> window extraction -> labels ->
    class balancing -> train/test split -> min-max normalization with a
    scaler fit on the training side. Deterministic under `seed`.
    """
    index, kept = build_feature_index(trajectories, geometry, max_step)
    windows, labels = [], []
    arrays = {}
    for traj in kept:
        if events_by_track is not None:
            events = events_by_track.get(traj.track_id, [])
        else:
            events = detect_lc_events(traj, geometry, vehicle_width)
        frames, rows = feature_track(index, traj, geometry)
        arrays[traj.track_id] = (frames, rows)
        if len(frames) < length:
            continue
        for start_f, end_f, label in extract_windows(frames, events, length, stride):
            windows.append(WindowRecord(traj.track_id, start_f, end_f, label))
            labels.append(label)

    if balance and all(any(l == c for l in labels) for c in CLASS_ORDER):
        windows, labels = balance_classes(windows, labels, seed=seed, lk_count=lk_count)

    if split_unit == "trajectory":
        train_ids, _ = split_track_ids({t.track_id for t in kept}, split_ratio, seed)
        is_train = [w.track_id in train_ids for w in windows]
    elif split_unit == "window":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x5912))))
        perm = rng.permutation(len(windows))
        n_train = int(round(split_ratio * len(windows)))
        train_pos = set(perm[:n_train].tolist())
        is_train = [i in train_pos for i in range(len(windows))]
    else:
        raise ValueError(f"unknown split_unit {split_unit!r}")

    def gather(selector):
        xs, ys, recs = [], [], []
        for w, lab, sel in zip(windows, labels, is_train):
            if sel != selector:
                continue
            frames, rows = arrays[w.track_id]
            i0 = int(np.searchsorted(frames, w.start_frame))
            xs.append(rows[i0:i0 + length])
            ys.append(CLASS_ORDER.index(lab))
            recs.append(w)
        x = np.stack(xs) if xs else np.zeros((0, length, FEATURE_DIM))
        return x, np.asarray(ys, dtype=np.int64), recs

    train_x, train_y, train_recs = gather(True)
    test_x, test_y, test_recs = gather(False)
    scaler = _fit_scaler(train_x if len(train_x) else np.zeros((1, length, FEATURE_DIM)))
    return IrDataset(
        train_x=_normalize_windows(train_x, scaler),
        train_y=train_y,
        test_x=_normalize_windows(test_x, scaler) if len(test_x) else test_x,
        test_y=test_y,
        scaler=scaler,
        train_records=train_recs,
        test_records=test_recs,
        seed=seed,
    )


def future_status_target(indicator_values, end_index, bin_frames=30, n_bins=2):
    """Per-bin means of the six indicators over (end, end + n_bins*bin_frames].

    Raises InsufficientHorizon when the track ends too early.
    """
    n = len(indicator_values)
    if end_index + n_bins * bin_frames > n - 1:
        raise InsufficientHorizon(
            f"need {n_bins * bin_frames} future frames, have {n - 1 - end_index}"
        )
    bins = []
    for b in range(n_bins):
        lo = end_index + 1 + b * bin_frames
        hi = lo + bin_frames
        bins.append(indicator_values[lo:hi].mean(axis=0))
    return np.stack(bins)


def build_sp_dataset(trajectories, geometry, length, stride=1, seed=0,
                     split_ratio=0.8, split_unit="trajectory",
                     vehicle_width=None, events_by_track=None,
                     bin_frames=30, n_bins=2, max_step=8):
    """LC-labeled windows with future-status targets for regression.

    Only windows labeled LLC/RLC are used; windows lacking the 60-frame
    horizon are dropped. Targets are per-bin means of the six ego
    indicators, normalized with a scaler fit on training targets.
    """
    index, kept = build_feature_index(trajectories, geometry, max_step)
    samples = []   # (record, x window, raw target)
    for traj in kept:
        if events_by_track is not None:
            events = events_by_track.get(traj.track_id, [])
        else:
            events = detect_lc_events(traj, geometry, vehicle_width)
        if not events:
            continue
        frames, rows = feature_track(index, traj, geometry)
        values = index.indicator_values[traj.track_id]
        if len(frames) < length:
            continue
        for start_f, end_f, label in extract_windows(frames, events, length, stride):
            if label == LK:
                continue
            i0 = int(np.searchsorted(frames, start_f))
            end_index = i0 + length - 1
            try:
                target = future_status_target(values, end_index, bin_frames, n_bins)
            except InsufficientHorizon:
                continue
            samples.append(
                (WindowRecord(traj.track_id, start_f, end_f, label),
                 rows[i0:i0 + length], target)
            )

    if split_unit == "trajectory":
        train_ids, _ = split_track_ids({t.track_id for t in kept}, split_ratio, seed)
        is_train = [rec.track_id in train_ids for rec, _, _ in samples]
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x5913))))
        perm = rng.permutation(len(samples))
        n_train = int(round(split_ratio * len(samples)))
        train_pos = set(perm[:n_train].tolist())
        is_train = [i in train_pos for i in range(len(samples))]

    def gather(selector):
        xs, ts, recs = [], [], []
        for (rec, x, t), sel in zip(samples, is_train):
            if sel != selector:
                continue
            xs.append(x)
            ts.append(t)
            recs.append(rec)
        x = np.stack(xs) if xs else np.zeros((0, length, FEATURE_DIM))
        t = np.stack(ts) if ts else np.zeros((0, n_bins, 6))
        return x, t, recs

    train_x, train_t, train_recs = gather(True)
    test_x, test_t, test_recs = gather(False)
    scaler = _fit_scaler(train_x if len(train_x) else np.zeros((1, length, FEATURE_DIM)))
    t_scaler = NormalizationScaler.fit(
        train_t.reshape(-1, 6) if len(train_t) else np.zeros((1, 6)),
        channel_names=INDICATOR_NAMES,
    )

    def norm_t(t):
        if not len(t):
            return t
        return t_scaler.transform(
            t.reshape(-1, 6), clamp=True, degenerate_fill=0.0
        ).reshape(t.shape)

    return SpDataset(
        train_x=_normalize_windows(train_x, scaler),
        train_t=norm_t(train_t),
        test_x=_normalize_windows(test_x, scaler) if len(test_x) else test_x,
        test_t=norm_t(test_t),
        scaler=scaler,
        target_scaler=t_scaler,
        train_records=train_recs,
        test_records=test_recs,
        n_bins=n_bins,
        seed=seed,
    )
