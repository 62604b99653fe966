"""Extraction of the 21 per-point time functions from a digit drawing.

Channels are indexed 1-21 in the conventional order for dynamic handwriting
verification: position, path-tangent angle, speed, log curvature radius,
acceleration magnitude, their derivatives, second position derivatives,
windowed speed ratio, consecutive-sample angle with derivative, its sine
and cosine, and windowed length-to-width ratios.

All derivatives are regression deltas over the sample index, not over
wall-clock time: capture hardware samples at a near-uniform rate and index
pacing avoids dividing by jittery time steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .capture import DigitSample
from .errors import AlreadyNormalized, SubsetEmpty, TooShort

#: Guard for logarithms and ratio denominators on degenerate geometry.
EPS = 1e-8

#: Windowed channels need two samples on each side of the center.
MINIMUM_LENGTH = 5

#: Channel count and 1-based names, in index order.
NUM_CHANNELS = 21
CHANNEL_NAMES = (
    "x", "y", "theta", "v", "rho", "a",
    "dx", "dy", "dtheta", "dv", "drho", "da",
    "ddx", "ddy",
    "v_ratio", "alpha", "dalpha", "sin_alpha", "cos_alpha",
    "ratio5", "ratio7",
)

#: Fixed channel subset of the baseline elastic matcher: positions plus
#: their first and second derivatives.
BASELINE_CHANNELS = frozenset({1, 2, 7, 8, 13, 14})

ALL_CHANNELS = frozenset(range(1, NUM_CHANNELS + 1))


@dataclass(frozen=True)
class FunctionMatrix:
    """The 21 extracted time functions of one sample, rows in channel order."""

    values: np.ndarray  # shape (21, N), float64
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != NUM_CHANNELS:
            raise ValueError(f"expected ({NUM_CHANNELS}, N) values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("function matrix contains non-finite values")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def channel(self, index: int) -> np.ndarray:
        """Return one channel by its 1-based Table index."""
        if not 1 <= index <= NUM_CHANNELS:
            raise IndexError(f"channel index {index} out of range 1..{NUM_CHANNELS}")
        return self.values[index - 1]

    def select(self, subset: "FunctionSubset") -> np.ndarray:
        """Rows for the given subset, in ascending channel order, shape (|S|, N)."""
        idx = sorted(subset.mask)
        return self.values[[i - 1 for i in idx]]


@dataclass(frozen=True)
class FunctionSubset:
    """A non-empty set of 1-based channel indices."""

    mask: frozenset[int]

    def __post_init__(self):
        mask = frozenset(int(i) for i in self.mask)
        if not mask:
            raise SubsetEmpty("channel subset must be non-empty")
        if not mask <= ALL_CHANNELS:
            raise ValueError(f"channel indices out of range: {sorted(mask - ALL_CHANNELS)}")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def of(cls, *indices: int) -> "FunctionSubset":
        return cls(frozenset(indices))

    @classmethod
    def from_iterable(cls, indices: Iterable[int]) -> "FunctionSubset":
        return cls(frozenset(indices))

    @classmethod
    def baseline(cls) -> "FunctionSubset":
        return cls(BASELINE_CHANNELS)

    @classmethod
    def all(cls) -> "FunctionSubset":
        return cls(ALL_CHANNELS)

    def __iter__(self):
        return iter(sorted(self.mask))

    def __len__(self) -> int:
        return len(self.mask)


def derivative(seq: Sequence[float]) -> np.ndarray:
    """Second-order regression delta with edge padding; length-preserving.

    d_n = [(s_{n+1} - s_{n-1}) + 2 (s_{n+2} - s_{n-2})] / 10, with the
    sequence padded by repeating its boundary values.
    """
    s = np.asarray(seq, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("derivative expects a 1-D sequence")
    if s.size < MINIMUM_LENGTH:
        raise TooShort(f"derivative needs >= {MINIMUM_LENGTH} samples, got {s.size}")
    p = np.concatenate(([s[0], s[0]], s, [s[-1], s[-1]]))
    return ((p[3:-1] - p[1:-3]) + 2.0 * (p[4:] - p[:-4])) / 10.0


def _window_bounds(n: int, half: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1)
    return lo, hi


def _speed_ratio(v: np.ndarray, half: int = 2) -> np.ndarray:
    """min/max speed over a centered window that shrinks at the edges."""
    n = v.size
    lo, hi = _window_bounds(n, half)
    out = np.empty(n)
    for i in range(n):
        w = v[lo[i]:hi[i] + 1]
        out[i] = w.min() / max(w.max(), EPS)
    return out


def _length_width_ratio(x: np.ndarray, y: np.ndarray, half: int) -> np.ndarray:
    """Path length over bounding-box width in a centered, edge-clamped window."""
    n = x.size
    steps = np.hypot(np.diff(x), np.diff(y))
    lo, hi = _window_bounds(n, half)
    out = np.empty(n)
    for i in range(n):
        a, b = lo[i], hi[i]
        length = steps[a:b].sum()
        width = x[a:b + 1].max() - x[a:b + 1].min()
        out[i] = length / (width + EPS)
    return out


def _unwrap(angles: np.ndarray) -> np.ndarray:
    # derivatives of angular channels are taken on the unwrapped signal so a
    # full turn does not fake a 2*pi jump in turning rate
    return np.unwrap(angles)


def extract(sample: DigitSample) -> FunctionMatrix:
    """Compute all 21 time functions for one (preprocessed) sample."""
    n = len(sample)
    if n < MINIMUM_LENGTH:
        raise TooShort(f"extraction needs >= {MINIMUM_LENGTH} points, got {n}")
    x = np.array(sample.xs(), dtype=np.float64)
    y = np.array(sample.ys(), dtype=np.float64)

    dx = derivative(x)
    dy = derivative(y)
    theta = np.arctan2(dy, dx)
    v = np.hypot(dx, dy)
    dtheta = derivative(_unwrap(theta))
    rho = np.log(np.maximum(v, EPS) / (np.abs(dtheta) + EPS))
    dv = derivative(v)
    a = np.hypot(dv, v * dtheta)

    alpha = np.empty(n)
    alpha[:-1] = np.arctan2(y[1:] - y[:-1], x[1:] - x[:-1])
    alpha[-1] = alpha[-2]
    dalpha = derivative(_unwrap(alpha))

    channels = np.empty((NUM_CHANNELS, n))
    channels[0] = x
    channels[1] = y
    channels[2] = theta
    channels[3] = v
    channels[4] = rho
    channels[5] = a
    channels[6] = dx
    channels[7] = dy
    channels[8] = dtheta
    channels[9] = dv
    channels[10] = derivative(rho)
    channels[11] = derivative(a)
    channels[12] = derivative(dx)
    channels[13] = derivative(dy)
    channels[14] = _speed_ratio(v)
    channels[15] = alpha
    channels[16] = dalpha
    channels[17] = np.sin(alpha)
    channels[18] = np.cos(alpha)
    channels[19] = _length_width_ratio(x, y, half=2)
    channels[20] = _length_width_ratio(x, y, half=3)
    return FunctionMatrix(values=channels, normalized=False)


def znorm(m: FunctionMatrix) -> FunctionMatrix:
    """Standardize each channel to zero mean, unit population std.

    Channels with no usable spread map to zeros: std below 1e-12, or below
    rounding noise relative to the channel magnitude (dividing by such a std
    would just amplify float error).
    """
    if m.normalized:
        raise AlreadyNormalized("function matrix is already z-normalized")
    v = m.values
    mean = v.mean(axis=1, keepdims=True)
    std = v.std(axis=1, keepdims=True)
    scale = np.abs(v).mean(axis=1, keepdims=True)
    degenerate = (std < 1e-12) | (std < 1e-8 * scale)
    out = np.where(degenerate, 0.0, (v - mean) / np.where(degenerate, 1.0, std))
    out = out - out.mean(axis=1, keepdims=True)
    return FunctionMatrix(values=out, normalized=True)


def extract_normalized(sample: DigitSample) -> FunctionMatrix:
    """Convenience: extraction followed by z-normalization."""
    return znorm(extract(sample))


def dump_channels_csv(m: FunctionMatrix, path: str) -> None:
    """Debug dump: one row per point, columns = index plus the 21 channels."""
    header = "index," + ",".join(CHANNEL_NAMES)
    data = np.column_stack([np.arange(m.length), m.values.T])
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt=["%d"] + ["%.17g"] * NUM_CHANNELS)
