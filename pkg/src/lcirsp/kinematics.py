"""Per-frame kinematic indicators from smoothed positions.

Velocity uses a median of symmetric finite differences over steps n = 1..N,
which rejects isolated position glitches; acceleration and heading rate are
plain central differences of the derived series. Heading comes from the
tail(t-n) -> head(t+n) vector, median-combined on a common angular branch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryFrame,
    DegenerateGeometry,
    DegenerateRange,
    NoFeasibleStep,
    TooShort,
)

INDICATOR_NAMES = ("vx", "vy", "ax", "ay", "theta", "dtheta")

DEFAULT_MAX_STEP = 8


@dataclass(frozen=True)
class KinematicState:
    vx: float
    vy: float
    ax: float
    ay: float
    theta: float      # degrees, in (-180, 180]
    dtheta: float     # degrees/s

    def as_array(self):
        return np.array([self.vx, self.vy, self.ax, self.ay, self.theta, self.dtheta])


def _median(values):
    # even count -> mean of the two central values
    return float(np.median(np.asarray(values, dtype=np.float64)))


def estimate_velocity(positions, t, max_step=DEFAULT_MAX_STEP, dt=1.0 / 30.0):
    """Median over n of (s(t+n) - s(t-n)) / (2 n dt); out-of-bounds n skipped."""
    s = np.asarray(positions, dtype=np.float64)
    n_frames = len(s)
    candidates = []
    for n in range(1, max_step + 1):
        if t - n < 0 or t + n >= n_frames:
            continue
        candidates.append((s[t + n] - s[t - n]) / (2.0 * n * dt))
    if not candidates:
        raise NoFeasibleStep(f"no feasible step at frame index {t}")
    return _median(candidates)


def estimate_acceleration(velocities, t, dt=1.0 / 30.0):
    v = np.asarray(velocities, dtype=np.float64)
    if t - 1 < 0 or t + 1 >= len(v):
        raise BoundaryFrame(f"frame index {t} lacks v(t-1) or v(t+1)")
    return float((v[t + 1] - v[t - 1]) / (2.0 * dt))


def wrap_degrees(angle):
    """Wrap into (-180, 180]."""
    a = (-angle + 180.0) % 360.0
    return 180.0 - a


def estimate_heading(head_positions, tail_positions, t, max_step=DEFAULT_MAX_STEP,
                     same_frame_axis=False):
    """Median heading over n of atan2(head(t+n) - tail(t-n)), degrees.

    Candidates are moved onto the branch of the n=1 candidate before the
    median so a wraparound seam cannot split them. With same_frame_axis=True
    the vehicle axis head(t) - tail(t) is used instead (alternative reading).
    """
    head = np.asarray(head_positions, dtype=np.float64)
    tail = np.asarray(tail_positions, dtype=np.float64)
    if same_frame_axis:
        dx = head[t, 0] - tail[t, 0]
        dy = head[t, 1] - tail[t, 1]
        if dx == 0.0 and dy == 0.0:
            raise DegenerateGeometry(f"head and tail coincide at frame index {t}")
        return math.degrees(math.atan2(dy, dx))

    n_frames = len(head)
    candidates = []
    for n in range(1, max_step + 1):
        if t - n < 0 or t + n >= n_frames:
            continue
        dx = head[t + n, 0] - tail[t - n, 0]
        dy = head[t + n, 1] - tail[t - n, 1]
        if dx == 0.0 and dy == 0.0:
            raise DegenerateGeometry(f"head(t+{n}) and tail(t-{n}) coincide at {t}")
        candidates.append(math.degrees(math.atan2(dy, dx)))
    if not candidates:
        raise NoFeasibleStep(f"no feasible step at frame index {t}")
    base = candidates[0]
    unwrapped = [base + wrap_degrees(c - base) for c in candidates]
    return wrap_degrees(_median(unwrapped))


def estimate_heading_rate(thetas, t, dt=1.0 / 30.0):
    """Central difference of heading, wrapped into (-180, 180] before dividing."""
    th = np.asarray(thetas, dtype=np.float64)
    if t - 1 < 0 or t + 1 >= len(th):
        raise BoundaryFrame(f"frame index {t} lacks theta(t-1) or theta(t+1)")
    return wrap_degrees(th[t + 1] - th[t - 1]) / (2.0 * dt)


def compute_indicators(traj, max_step=DEFAULT_MAX_STEP, same_frame_axis=False):
    """All six indicators for every frame with a full +/-(max_step+1) stencil.

    Returns (frames, states): frames is the int64 array of absolute frame
    numbers t in [max_step+1, len-2-max_step] for which the full stencil of
    every estimator is in bounds, so the output is gap-free. Raises TooShort
    when fewer than 2*max_step + 3 input frames exist.
    """
    n = len(traj)
    if n < 2 * max_step + 3:
        raise TooShort(
            f"track {traj.track_id}: {n} frames < {2 * max_step + 3} required"
        )
    dt = 1.0 / traj.frame_rate
    lo, hi = max_step + 1, n - 2 - max_step  # inclusive index range
    if hi < lo:
        return traj.frames[:0].copy(), []

    # velocity / heading needed one frame beyond the output range for the
    # central differences of ax/ay/dtheta
    vx = {t: estimate_velocity(traj.center[:, 0], t, max_step, dt) for t in range(lo - 1, hi + 2)}
    vy = {t: estimate_velocity(traj.center[:, 1], t, max_step, dt) for t in range(lo - 1, hi + 2)}
    th = {
        t: estimate_heading(traj.head, traj.tail, t, max_step, same_frame_axis)
        for t in range(lo - 1, hi + 2)
    }

    states = []
    for t in range(lo, hi + 1):
        ax = (vx[t + 1] - vx[t - 1]) / (2.0 * dt)
        ay = (vy[t + 1] - vy[t - 1]) / (2.0 * dt)
        dth = wrap_degrees(th[t + 1] - th[t - 1]) / (2.0 * dt)
        states.append(KinematicState(vx[t], vy[t], ax, ay, th[t], dth))
    return traj.frames[lo:hi + 1].copy(), states


def indicator_matrix(states) -> np.ndarray:
    """(n, 6) array in INDICATOR_NAMES order."""
    if not states:
        return np.zeros((0, 6))
    return np.stack([s.as_array() for s in states])


@dataclass
class NormalizationScaler:
    """Per-channel min/max for [0, 1] rescaling, replayable at test time."""

    minima: np.ndarray
    maxima: np.ndarray
    channel_names: tuple | None = None

    def __post_init__(self):
        self.minima = np.asarray(self.minima, dtype=np.float64)
        self.maxima = np.asarray(self.maxima, dtype=np.float64)
        if np.any(self.maxima < self.minima):
            raise DegenerateRange()

    @classmethod
    def fit(cls, values, channel_names=None):
        """values: (..., n_channels); extrema over all leading axes."""
        v = np.asarray(values, dtype=np.float64).reshape(-1, np.shape(values)[-1])
        return cls(v.min(axis=0), v.max(axis=0), channel_names)

    def degenerate_channels(self):
        return np.where(self.maxima == self.minima)[0]

    def transform(self, values, clamp=True, degenerate_fill=None):
        """(x - min) / (max - min), clamped to [0, 1].

        Degenerate channels raise DegenerateRange unless degenerate_fill is
        given, in which case that constant is substituted for them.
        """
        v = np.asarray(values, dtype=np.float64)
        span = self.maxima - self.minima
        degen = span == 0.0
        if np.any(degen) and degenerate_fill is None:
            raise DegenerateRange(int(np.where(degen)[0][0]))
        safe_span = np.where(degen, 1.0, span)
        out = (v - self.minima) / safe_span
        if np.any(degen):
            out = np.where(degen, float(degenerate_fill), out)
        if clamp:
            out = np.clip(out, 0.0, 1.0)
        return out

    def inverse(self, values):
        return np.asarray(values, dtype=np.float64) * (self.maxima - self.minima) + self.minima

    def to_json(self):
        names = self.channel_names or [f"ch{i}" for i in range(len(self.minima))]
        return {
            name: {"min": float(mn), "max": float(mx)}
            for name, mn, mx in zip(names, self.minima, self.maxima)
        }

    @classmethod
    def from_json(cls, doc):
        names = tuple(doc.keys())
        minima = np.array([doc[n]["min"] for n in names])
        maxima = np.array([doc[n]["max"] for n in names])
        return cls(minima, maxima, names)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=False)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def min_max_normalize(series, scaler: NormalizationScaler | None = None):
    """Normalize a 1-D series to [0, 1]; returns (normalized, scaler).

    A supplied scaler is reused (test-time replay); otherwise one is fit.
    Raises DegenerateRange when max == min.
    """
    s = np.asarray(series, dtype=np.float64)
    if s.size == 0:
        raise DegenerateRange()
    if scaler is None:
        scaler = NormalizationScaler.fit(s.reshape(-1, 1))
    out = scaler.transform(s.reshape(-1, 1)).reshape(s.shape)
    return out, scaler
