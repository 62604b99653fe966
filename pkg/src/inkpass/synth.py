"""Synthetic touchscreen digit corpus.

Each digit has a one-stroke prototype curve.  A writer owns a stable style:
an affine distortion, a monotone speed warp, and per-digit shape offsets.
Sessions add a small drift on top, repetitions only noise, so same-writer
samples cluster tighter than cross-writer ones.  Everything is driven by one
seeded generator, so a given (n_writers, seed) pair always yields the same
dataset byte for byte.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .capture import Dataset, DigitSample, TouchPoint

# Control polylines in a unit box, y growing downward like a touchscreen.
# Single-stroke skeletons; crossbars are folded into the stroke.
_DIGIT_CONTROLS: dict[int, list[tuple[float, float]]] = {
    0: [(0.5, 0.05), (0.15, 0.25), (0.1, 0.55), (0.3, 0.9), (0.62, 0.93),
        (0.85, 0.65), (0.85, 0.3), (0.62, 0.06), (0.5, 0.05)],
    1: [(0.3, 0.25), (0.5, 0.05), (0.52, 0.3), (0.52, 0.6), (0.52, 0.95)],
    2: [(0.2, 0.25), (0.4, 0.05), (0.7, 0.1), (0.75, 0.35), (0.5, 0.6),
        (0.25, 0.85), (0.2, 0.95), (0.55, 0.95), (0.85, 0.93)],
    3: [(0.25, 0.1), (0.6, 0.05), (0.75, 0.25), (0.55, 0.45), (0.45, 0.5),
        (0.6, 0.55), (0.78, 0.75), (0.55, 0.95), (0.22, 0.88)],
    4: [(0.6, 0.05), (0.35, 0.35), (0.15, 0.65), (0.5, 0.63), (0.85, 0.6),
        (0.68, 0.45), (0.66, 0.75), (0.65, 0.95)],
    5: [(0.75, 0.08), (0.4, 0.05), (0.3, 0.1), (0.28, 0.4), (0.5, 0.42),
        (0.75, 0.55), (0.72, 0.82), (0.45, 0.95), (0.2, 0.85)],
    6: [(0.7, 0.08), (0.4, 0.25), (0.22, 0.5), (0.18, 0.78), (0.4, 0.95),
        (0.65, 0.85), (0.68, 0.62), (0.45, 0.55), (0.25, 0.66)],
    7: [(0.15, 0.1), (0.5, 0.07), (0.85, 0.05), (0.65, 0.35), (0.45, 0.65),
        (0.3, 0.95)],
    8: [(0.5, 0.05), (0.25, 0.15), (0.4, 0.42), (0.65, 0.6), (0.72, 0.85),
        (0.45, 0.95), (0.25, 0.8), (0.45, 0.55), (0.68, 0.35), (0.72, 0.15),
        (0.5, 0.05)],
    9: [(0.72, 0.3), (0.55, 0.08), (0.28, 0.12), (0.2, 0.35), (0.4, 0.5),
        (0.68, 0.42), (0.73, 0.25), (0.72, 0.55), (0.68, 0.95)],
}

_SCREEN_SCALE = 320.0  # unit box to something phone-sized


def _prototype(digit: int) -> CubicSpline:
    pts = np.asarray(_DIGIT_CONTROLS[digit], dtype=float)
    u = np.linspace(0.0, 1.0, len(pts))
    return CubicSpline(u, pts, axis=0, bc_type="natural")


_SPLINES = {d: _prototype(d) for d in range(10)}


def _speed_warp(t: np.ndarray, strength: float) -> np.ndarray:
    """Monotone reparameterization of [0, 1]; |strength| < 1 keeps it so."""
    return t + strength * np.sin(2.0 * math.pi * t) / (2.0 * math.pi)


class _WriterStyle:
    """Stable per-writer drawing habits, drawn once from the corpus rng."""

    def __init__(self, rng: np.random.Generator):
        self.scale_x = rng.uniform(0.8, 1.25)
        self.scale_y = rng.uniform(0.8, 1.25)
        self.shear = rng.uniform(-0.25, 0.25)
        self.rotation = rng.uniform(-0.18, 0.18)
        self.warp = rng.uniform(-0.6, 0.6)
        self.points = int(rng.integers(45, 70))
        # per-digit shape habits, fixed for the writer's lifetime
        self.deltas = {
            d: rng.normal(0.0, 0.045, size=(len(_DIGIT_CONTROLS[d]), 2))
            for d in range(10)
        }

    def transform(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rotate = np.array([[c, -s], [s, c]])
        shear = np.array([[1.0, self.shear], [0.0, 1.0]])
        scale = np.diag([self.scale_x, self.scale_y])
        return rotate @ shear @ scale


def _render(
    rng: np.random.Generator,
    style: _WriterStyle,
    digit: int,
    session_delta: np.ndarray,
) -> tuple[TouchPoint, ...]:
    controls = np.asarray(_DIGIT_CONTROLS[digit], dtype=float)
    wobble = rng.normal(0.0, 0.012, size=controls.shape)
    pts = controls + style.deltas[digit] + session_delta + wobble
    u = np.linspace(0.0, 1.0, len(pts))
    spline = CubicSpline(u, pts, axis=0, bc_type="natural")

    n = int(np.clip(round(style.points * rng.uniform(0.85, 1.15)), 40, 80))
    warp = float(np.clip(style.warp + rng.normal(0.0, 0.05), -0.9, 0.9))
    coords = spline(_speed_warp(np.linspace(0.0, 1.0, n), warp))
    coords = coords @ style.transform().T * _SCREEN_SCALE
    coords += rng.normal(0.0, 0.6, size=coords.shape)  # touch sensor noise

    dt = rng.uniform(7.0, 14.0, size=n)
    times = np.concatenate([[0.0], np.cumsum(dt[:-1])])
    return tuple(
        TouchPoint(float(x), float(y), float(t))
        for (x, y), t in zip(coords, times)
    )


def synthetic_dataset(
    n_writers: int = 20,
    seed: int = 0,
    dev_user_count: int | None = None,
    sessions: tuple[int, ...] = (1, 2),
    repetitions: tuple[int, ...] = (1, 2, 3, 4),
) -> Dataset:
    """Deterministic multi-writer corpus in the standard dataset layout."""
    if n_writers < 1:
        raise ValueError("need at least one writer")
    if dev_user_count is None:
        dev_user_count = n_writers // 2
    rng = np.random.default_rng(seed)
    samples = []
    for w in range(n_writers):
        user = f"synth{w:03d}"
        style = _WriterStyle(rng)
        for digit in range(10):
            for session in sessions:
                session_delta = rng.normal(
                    0.0, 0.02, size=(len(_DIGIT_CONTROLS[digit]), 2))
                for rep in repetitions:
                    samples.append(DigitSample(
                        user, digit, session, rep,
                        _render(rng, style, digit, session_delta)))
    return Dataset(samples=tuple(samples), dev_user_count=dev_user_count)
