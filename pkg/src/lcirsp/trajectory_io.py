"""Trajectory CSV ingestion, frame-gap filtering and moving-average smoothing.

Input files are per-scene CSVs with one row per (vehicle, frame). The default
column names follow the CitySim export convention; a mapping lets other
exports load without editing files. All positions are in feet, frames at a
declared rate (30 Hz default).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyInput, EmptyTrajectory, MalformedRow, MissingColumn

DEFAULT_SCHEMA = {
    "frame": "frame",
    "track_id": "carId",
    "head_x": "headX",
    "head_y": "headY",
    "tail_x": "tailX",
    "tail_y": "tailY",
    "center_x": "carCenterX",
    "center_y": "carCenterY",
    "lane_id": "laneId",
}

_COORD_FIELDS = ("head_x", "head_y", "tail_x", "tail_y", "center_x", "center_y")


@dataclass(frozen=True)
class RawTrackPoint:
    frame: int
    track_id: int
    head_x: float
    head_y: float
    tail_x: float
    tail_y: float
    center_x: float
    center_y: float
    lane_id: int


@dataclass
class Trajectory:
    """Frame-ordered track of one vehicle.

    `columns` holds the per-point fields as parallel numpy arrays; `points`
    builds RawTrackPoint views on demand.
    """

    track_id: int
    frames: np.ndarray          # int64, strictly ascending
    head: np.ndarray            # (n, 2) float64
    tail: np.ndarray            # (n, 2)
    center: np.ndarray          # (n, 2)
    lane_ids: np.ndarray        # int64
    frame_rate: float = 30.0

    def __len__(self):
        return len(self.frames)

    def point(self, i: int) -> RawTrackPoint:
        return RawTrackPoint(
            frame=int(self.frames[i]),
            track_id=self.track_id,
            head_x=float(self.head[i, 0]),
            head_y=float(self.head[i, 1]),
            tail_x=float(self.tail[i, 0]),
            tail_y=float(self.tail[i, 1]),
            center_x=float(self.center[i, 0]),
            center_y=float(self.center[i, 1]),
            lane_id=int(self.lane_ids[i]),
        )

    @property
    def points(self):
        return [self.point(i) for i in range(len(self))]


def parse_trajectories(csv_source, schema=None, frame_rate=30.0):
    """Parse a CSV byte/text stream into one Trajectory per track_id.

    Rows with non-numeric or non-finite coordinates raise MalformedRow with
    the 1-based physical line number. Raises MissingColumn / EmptyInput.
    """
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    if isinstance(csv_source, (bytes, bytearray)):
        stream = io.StringIO(csv_source.decode("utf-8"))
    elif isinstance(csv_source, str):
        stream = io.StringIO(csv_source)
    else:
        raw = csv_source.read()
        stream = io.StringIO(raw.decode("utf-8") if isinstance(raw, bytes) else raw)

    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("CSV source has no header row")
    header = [h.strip() for h in header]
    col_idx = {}
    for key, col_name in schema.items():
        if col_name not in header:
            raise MissingColumn(col_name)
        col_idx[key] = header.index(col_name)

    by_track: dict[int, list] = {}
    n_rows = 0
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise MalformedRow(line_no, "fewer fields than header")
        try:
            frame = int(float(row[col_idx["frame"]]))
            track_id = int(float(row[col_idx["track_id"]]))
            lane_id = int(float(row[col_idx["lane_id"]]))
        except ValueError:
            raise MalformedRow(line_no, "non-integer frame/track/lane id")
        coords = []
        for f in _COORD_FIELDS:
            try:
                v = float(row[col_idx[f]])
            except ValueError:
                raise MalformedRow(line_no, f"non-numeric {f}")
            if not math.isfinite(v):
                raise MalformedRow(line_no, f"non-finite {f}")
            coords.append(v)
        if lane_id < 0:
            raise MalformedRow(line_no, "negative lane_id")
        by_track.setdefault(track_id, []).append((frame, *coords, lane_id))
        n_rows += 1

    if n_rows == 0:
        raise EmptyInput("CSV source has no data rows")

    out = []
    for track_id in sorted(by_track):
        rows = sorted(by_track[track_id], key=lambda r: r[0])
        arr = np.asarray(rows, dtype=np.float64)
        out.append(
            Trajectory(
                track_id=track_id,
                frames=arr[:, 0].astype(np.int64),
                head=arr[:, 1:3].copy(),
                tail=arr[:, 3:5].copy(),
                center=arr[:, 5:7].copy(),
                lane_ids=arr[:, 7].astype(np.int64),
                frame_rate=frame_rate,
            )
        )
    return out


def remove_frame_gaps(traj: Trajectory) -> bool:
    """True iff the trajectory has no adjacent frame difference > 1."""
    if len(traj) == 0:
        raise EmptyTrajectory(f"track {traj.track_id} has no points")
    if len(traj) == 1:
        return True
    return bool(np.all(np.diff(traj.frames) <= 1))


def split_on_gaps(traj: Trajectory):
    """Alternative to dropping: cut a gapped track into contiguous segments.

    Segment track ids are synthesized as track_id*1000 + k so downstream
    grouping still sees distinct tracks.
    """
    if len(traj) == 0:
        raise EmptyTrajectory(f"track {traj.track_id} has no points")
    breaks = np.where(np.diff(traj.frames) > 1)[0] + 1
    if len(breaks) == 0:
        return [traj]
    pieces = []
    bounds = [0, *breaks.tolist(), len(traj)]
    for k in range(len(bounds) - 1):
        lo, hi = bounds[k], bounds[k + 1]
        pieces.append(
            Trajectory(
                track_id=traj.track_id * 1000 + k,
                frames=traj.frames[lo:hi].copy(),
                head=traj.head[lo:hi].copy(),
                tail=traj.tail[lo:hi].copy(),
                center=traj.center[lo:hi].copy(),
                lane_ids=traj.lane_ids[lo:hi].copy(),
                frame_rate=traj.frame_rate,
            )
        )
    return pieces


def smoothing_window(frame_rate: float, window_seconds: float = 0.5) -> int:
    """Nearest odd number of frames covering window_seconds (15 at 30 Hz)."""
    w = int(round(window_seconds * frame_rate))
    if w % 2 == 0:
        # round to nearest odd: pick whichever odd neighbor is closer to the
        # exact (possibly fractional) span, ties upward
        exact = window_seconds * frame_rate
        w = w - 1 if abs((w - 1) - exact) < abs((w + 1) - exact) else w + 1
    return max(w, 1)


def _centered_moving_average(x: np.ndarray, w: int) -> np.ndarray:
    """Centered mean with symmetric shrink at the ends; output length == input."""
    n = len(x)
    half = w // 2
    csum = np.concatenate(([0.0], np.cumsum(x, dtype=np.float64)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1)
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)


def moving_average_smooth(traj: Trajectory, window_seconds: float = 0.5) -> Trajectory:
    """Smooth the six coordinate channels with a centered moving average.

    Frames, track_id and lane ids are untouched; near the sequence ends the
    window shrinks symmetrically so no data is fabricated.
    """
    if len(traj) == 0:
        raise EmptyTrajectory(f"track {traj.track_id} has no points")
    w = smoothing_window(traj.frame_rate, window_seconds)

    def smooth2(a):
        return np.stack(
            [_centered_moving_average(a[:, 0], w), _centered_moving_average(a[:, 1], w)],
            axis=1,
        )

    return replace(
        traj,
        head=smooth2(traj.head),
        tail=smooth2(traj.tail),
        center=smooth2(traj.center),
        frames=traj.frames.copy(),
        lane_ids=traj.lane_ids.copy(),
    )


def clean_trajectories(trajectories, window_seconds=0.5, split_segments=False):
    """Gap-filter then smooth a parsed corpus.

    Returns (cleaned, dropped_track_ids). With split_segments=True, gapped
    tracks are split into contiguous segments instead of dropped; synthesized
    segment ids are re-assigned if they collide with existing track ids.
    """
    kept, dropped = [], []
    for traj in trajectories:
        if remove_frame_gaps(traj):
            kept.append(traj)
        elif split_segments:
            kept.extend(split_on_gaps(traj))
        else:
            dropped.append(traj.track_id)
    if split_segments and kept:
        used = set()
        next_free = max(t.track_id for t in kept) + 1
        for traj in kept:
            if traj.track_id in used:
                traj.track_id = next_free
                next_free += 1
            used.add(traj.track_id)
    return [moving_average_smooth(t, window_seconds) for t in kept], dropped


def write_trajectories_csv(trajectories, stream, schema=None):
    """Serialize trajectories back to the input CSV schema."""
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    cols = ["frame", "track_id", "head_x", "head_y", "tail_x", "tail_y",
            "center_x", "center_y", "lane_id"]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow([schema[c] for c in cols])
    for traj in trajectories:
        for i in range(len(traj)):
            writer.writerow([
                int(traj.frames[i]), traj.track_id,
                repr(float(traj.head[i, 0])), repr(float(traj.head[i, 1])),
                repr(float(traj.tail[i, 0])), repr(float(traj.tail[i, 1])),
                repr(float(traj.center[i, 0])), repr(float(traj.center[i, 1])),
                int(traj.lane_ids[i]),
            ])
