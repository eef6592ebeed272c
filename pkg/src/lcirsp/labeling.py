"""Lane-change event detection and intention labeling of windows.

An LC event is anchored at the first frame where the vehicle's front corner
touches the boundary of its current lane toward the target lane; the 3 s
interval before that anchor is the intention interval. Windows whose end
frame falls inside the (closed) interval carry the event's direction label,
everything else is lane keeping.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import TooShort, UnknownLane

log = logging.getLogger(__name__)

LK, LLC, RLC = "LK", "LLC", "RLC"
CLASS_ORDER = (LK, RLC, LLC)  # confusion-matrix / report row order

INTENTION_SECONDS = 3.0


@dataclass(frozen=True)
class Lane:
    lane_id: int
    left_boundary_y: float   # lateral coordinate of the left boundary (in travel direction)
    right_boundary_y: float
    direction: int = 1       # +1 travel along +x, -1 along -x

    @property
    def center_y(self):
        return 0.5 * (self.left_boundary_y + self.right_boundary_y)


class LaneGeometry:
    """Straight-segment lane model: per-lane lateral boundary offsets."""

    def __init__(self, lanes):
        self.lanes = {lane.lane_id: lane for lane in lanes}

    def __contains__(self, lane_id):
        return lane_id in self.lanes

    def lane(self, lane_id) -> Lane:
        try:
            return self.lanes[lane_id]
        except KeyError:
            raise UnknownLane(lane_id) from None

    def adjacent(self, lane_id):
        """(left_lane_id, right_lane_id) in the direction of travel; None if absent."""
        lane = self.lane(lane_id)
        left = right = None
        for other in self.lanes.values():
            if other.lane_id == lane.lane_id or other.direction != lane.direction:
                continue
            if np.isclose(other.right_boundary_y, lane.left_boundary_y):
                left = other.lane_id
            if np.isclose(other.left_boundary_y, lane.right_boundary_y):
                right = other.lane_id
        return left, right

    def to_json(self):
        return {
            "lanes": [
                {
                    "id": lane.lane_id,
                    "left_boundary_y": lane.left_boundary_y,
                    "right_boundary_y": lane.right_boundary_y,
                    "direction": lane.direction,
                }
                for lane in sorted(self.lanes.values(), key=lambda l: l.lane_id)
            ]
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            Lane(
                lane_id=int(d["id"]),
                left_boundary_y=float(d["left_boundary_y"]),
                right_boundary_y=float(d["right_boundary_y"]),
                direction=int(d.get("direction", 1)),
            )
            for d in doc["lanes"]
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class LcEvent:
    track_id: int
    direction: str               # LLC or RLC
    lc_start_frame: int
    intention_start_frame: int

    @classmethod
    def at(cls, track_id, direction, lc_start_frame, frame_rate=30.0):
        offset = int(round(INTENTION_SECONDS * frame_rate))
        return cls(track_id, direction, lc_start_frame, lc_start_frame - offset)


def _front_corner_offset(traj, i, vehicle_width):
    """Half the lateral extent of the vehicle's footprint at point i."""
    if vehicle_width is not None:
        return 0.5 * vehicle_width
    return 0.5 * abs(traj.head[i, 1] - traj.tail[i, 1])


def detect_lc_events(traj, geometry: LaneGeometry, vehicle_width=None):
    """One LcEvent per lane transition of the track.

    The anchor is found by scanning backward from the lane_id change frame
    for the first frame of the contiguous run in which the front corner is
    at or beyond the shared boundary toward the target lane. If no touch is
    found (noisy width), the event is anchored at the change frame with a
    warning rather than dropped.
    """
    events = []
    lane_ids = traj.lane_ids
    for i in range(1, len(traj)):
        if lane_ids[i] == lane_ids[i - 1]:
            continue
        src = geometry.lane(int(lane_ids[i - 1]))
        dst = geometry.lane(int(lane_ids[i]))
        left_id, right_id = geometry.adjacent(src.lane_id)
        if dst.lane_id == left_id:
            direction = LLC
            boundary_y = src.left_boundary_y
        elif dst.lane_id == right_id:
            direction = RLC
            boundary_y = src.right_boundary_y
        else:
            # non-adjacent jump (tracking glitch): classify by lateral order
            direction = LLC if _is_left_of(src, dst) else RLC
            boundary_y = src.left_boundary_y if direction == LLC else src.right_boundary_y
        # lateral sign of "toward the target lane"
        toward = 1.0 if (direction == LLC) == (src.left_boundary_y > src.right_boundary_y) else -1.0

        def beyond(j):
            corner_y = traj.head[j, 1] + toward * _front_corner_offset(traj, j, vehicle_width)
            return toward * (corner_y - boundary_y) >= 0.0

        j = i
        while j - 1 >= 0 and beyond(j - 1):
            j -= 1
        if not beyond(j):
            log.warning(
                "track %s: no boundary touch found before lane change at frame %s; "
                "anchoring event there", traj.track_id, int(traj.frames[i]),
            )
            j = i
        events.append(
            LcEvent.at(traj.track_id, direction, int(traj.frames[j]), traj.frame_rate)
        )
    return events


def _is_left_of(src: Lane, dst: Lane):
    left_is_up = src.left_boundary_y > src.right_boundary_y
    return (dst.center_y > src.center_y) == left_is_up


def label_window(window_end_frame, events):
    """Fig.-11 rule: direction label iff the endpoint lies in an intention
    interval (closed on both sides), LK otherwise. Overlapping intervals are
    resolved toward the earlier lc_start_frame."""
    best = None
    for ev in events:
        if ev.intention_start_frame <= window_end_frame <= ev.lc_start_frame:
            if best is None or ev.lc_start_frame < best.lc_start_frame:
                best = ev
    return best.direction if best is not None else LK


def extract_windows(frames, events, length, stride=1):
    """All in-bounds windows over a gap-free frame index array.

    Returns a list of (start_frame, end_frame, label). `frames` is the
    absolute frame numbering of an indicator sequence; labels are taken at
    each window's end frame.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = len(frames)
    if n < length:
        raise TooShort(f"{n} frames < window length {length}")
    out = []
    for start in range(0, n - length + 1, stride):
        end = start + length - 1
        end_frame = int(frames[end])
        out.append((int(frames[start]), end_frame, label_window(end_frame, events)))
    return out


def balance_classes(windows, labels, seed, lk_count=None):
    """Subsample LK windows without replacement to round(mean(#LLC, #RLC)).

    LLC/RLC items are kept whole. `lk_count` overrides the target (the
    paper used 18000). Returns (windows, labels) index-aligned; deterministic
    for a fixed seed. Classes other than LK are never touched.
    """
    labels = list(labels)
    idx_lk = [i for i, c in enumerate(labels) if c == LK]
    n_llc = sum(1 for c in labels if c == LLC)
    n_rlc = sum(1 for c in labels if c == RLC)
    target = lk_count if lk_count is not None else int(round(0.5 * (n_llc + n_rlc)))
    keep = set(range(len(labels)))
    if len(idx_lk) > target:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        chosen = rng.choice(len(idx_lk), size=target, replace=False)
        drop = set(idx_lk) - {idx_lk[i] for i in chosen}
        keep -= drop
    kept = sorted(keep)
    return [windows[i] for i in kept], [labels[i] for i in kept]
