"""Domain types for finger-drawn digit strokes and dataset ingestion.

A sample is one digit drawn on a touchscreen: an ordered sequence of
``(x, y, t)`` points labeled with user, digit, session and repetition.
Samples live on disk as small text files (one directory per user) and can
round-trip through :func:`write_dataset` / :func:`load_dataset` without
loss.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateKey,
    EmptyDataset,
    MalformedFile,
    NonMonotonicTime,
    TooShort,
)

#: Window operators on the extracted time functions need 5 samples.
MIN_POINTS = 5

#: Development split size for the full reference corpus (93 users total).
DEFAULT_DEV_USERS = 50

_FILE_RE = re.compile(r"^(?P<user>.+)_(?P<digit>\d)_s(?P<session>\d)_r(?P<rep>\d)\.txt$")


@dataclass(frozen=True)
class TouchPoint:
    """One digitizer event: device-pixel coordinates and a millisecond timestamp."""

    x: float
    y: float
    t: float

    def __post_init__(self):
        for name in ("x", "y", "t"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite {name!r} in touch point: {v}")
        if self.t < 0:
            raise ValueError(f"negative timestamp: {self.t}")


@dataclass(frozen=True)
class DigitSample:
    """A labeled single-digit drawing.

    Timestamps must be strictly increasing (the loader collapses duplicate
    consecutive timestamps before construction).  The 5-point minimum needed
    by windowed time functions is enforced at ingestion and extraction, not
    here, so short fragments remain constructible for unit-level work.
    """

    user_id: str
    digit: int
    session: int
    repetition: int
    points: tuple[TouchPoint, ...]

    def __post_init__(self):
        if not 0 <= self.digit <= 9:
            raise ValueError(f"digit out of range: {self.digit}")
        if self.session not in (1, 2):
            raise ValueError(f"session must be 1 or 2, got {self.session}")
        if not 1 <= self.repetition <= 4:
            raise ValueError(f"repetition out of range: {self.repetition}")
        pts = tuple(self.points)
        if len(pts) < 2:
            raise ValueError("a sample needs at least 2 points")
        object.__setattr__(self, "points", pts)
        for a, b in zip(pts, pts[1:]):
            if b.t < a.t:
                raise NonMonotonicTime(
                    f"timestamp decreases: {a.t} -> {b.t} ({self.key})"
                )
            if b.t == a.t:
                raise ValueError(f"duplicate consecutive timestamp {a.t} ({self.key})")

    @property
    def key(self) -> tuple[str, int, int, int]:
        return (self.user_id, self.digit, self.session, self.repetition)

    def __len__(self) -> int:
        return len(self.points)

    def xs(self) -> list[float]:
        return [p.x for p in self.points]

    def ys(self) -> list[float]:
        return [p.y for p in self.points]

    def ts(self) -> list[float]:
        return [p.t for p in self.points]


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of samples plus the development/evaluation split.

    The split is computed from lexicographically sorted user ids: the first
    ``dev_user_count`` users form the development partition, the rest the
    evaluation partition.
    """

    samples: tuple[DigitSample, ...]
    dev_user_count: int = DEFAULT_DEV_USERS
    skipped: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        seen = set()
        for s in self.samples:
            if s.key in seen:
                raise DuplicateKey(f"duplicate sample key {s.key}")
            seen.add(s.key)

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(sorted({s.user_id for s in self.samples}))

    @property
    def dev_users(self) -> tuple[str, ...]:
        return self.users[: self.dev_user_count]

    @property
    def eval_users(self) -> tuple[str, ...]:
        return self.users[self.dev_user_count:]

    def subset(self, users: Iterable[str]) -> "Dataset":
        keep = set(users)
        return Dataset(
            samples=tuple(s for s in self.samples if s.user_id in keep),
            dev_user_count=self.dev_user_count,
        )

    def dev_split(self) -> "Dataset":
        return self.subset(self.dev_users)

    def eval_split(self) -> "Dataset":
        return self.subset(self.eval_users)

    def get(self, user_id: str, digit: int, session: int, repetition: int) -> DigitSample:
        for s in self.samples:
            if s.key == (user_id, digit, session, repetition):
                return s
        raise KeyError((user_id, digit, session, repetition))

    def by_key(self) -> dict[tuple[str, int, int, int], DigitSample]:
        return {s.key: s for s in self.samples}

    def __len__(self) -> int:
        return len(self.samples)


# --- ingestion -------------------------------------------------------------

def parse_sample_text(
    text: str,
    meta: Mapping[str, object],
    min_points: int = MIN_POINTS,
) -> DigitSample:
    """Parse the per-sample text format: a point-count header then "x y t" rows.

    Consecutive rows sharing a timestamp are collapsed (the first one wins).
    ``min_points`` applies after collapsing; pass a smaller value to admit
    fragments for unit-level work.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedFile("empty sample file")
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise MalformedFile(f"bad header {lines[0]!r}: expected a point count") from None
    rows = lines[1:]
    if len(rows) != count:
        raise MalformedFile(f"header says {count} points, file has {len(rows)} rows")

    raw: list[tuple[float, float, float]] = []
    for i, row in enumerate(rows, start=2):
        fields = row.split()
        if len(fields) != 3:
            raise MalformedFile(f"line {i}: expected 'x y t', got {row!r}")
        try:
            x, y, t = (float(f) for f in fields)
        except ValueError:
            raise MalformedFile(f"line {i}: non-numeric field in {row!r}") from None
        if not all(math.isfinite(v) for v in (x, y, t)):
            raise MalformedFile(f"line {i}: non-finite value in {row!r}")
        raw.append((x, y, t))

    deduped: list[tuple[float, float, float]] = []
    for x, y, t in raw:
        if deduped and t == deduped[-1][2]:
            continue
        if deduped and t < deduped[-1][2]:
            raise NonMonotonicTime(f"timestamp decreases: {deduped[-1][2]} -> {t}")
        deduped.append((x, y, t))
    if len(deduped) < min_points:
        raise TooShort(f"{len(deduped)} points after dedup, need {min_points}")

    return DigitSample(
        user_id=str(meta["user_id"]),
        digit=int(meta["digit"]),
        session=int(meta["session"]),
        repetition=int(meta["repetition"]),
        points=tuple(TouchPoint(x, y, t) for x, y, t in deduped),
    )


def load_sample(path: str, min_points: int = MIN_POINTS) -> DigitSample:
    """Load one sample file named ``<user>_<digit>_s<session>_r<rep>.txt``."""
    name = os.path.basename(path)
    m = _FILE_RE.match(name)
    if m is None:
        raise MalformedFile(f"file name {name!r} does not match the sample pattern")
    meta = {
        "user_id": m.group("user"),
        "digit": m.group("digit"),
        "session": m.group("session"),
        "repetition": m.group("rep"),
    }
    with open(path, "r", encoding="ascii") as fh:
        return parse_sample_text(fh.read(), meta, min_points=min_points)


def sample_filename(s: DigitSample) -> str:
    return f"{s.user_id}_{s.digit}_s{s.session}_r{s.repetition}.txt"


def format_sample_text(s: DigitSample) -> str:
    """Serialize a sample to the text format; floats keep full precision."""
    lines = [str(len(s.points))]
    lines.extend(f"{repr(p.x)} {repr(p.y)} {repr(p.t)}" for p in s.points)
    return "\n".join(lines) + "\n"


def write_dataset(ds: Dataset, root: str) -> None:
    """Write every sample under ``root/<user>/<file>`` in the text format."""
    for s in ds.samples:
        user_dir = os.path.join(root, s.user_id)
        os.makedirs(user_dir, exist_ok=True)
        with open(os.path.join(user_dir, sample_filename(s)), "w", encoding="ascii") as fh:
            fh.write(format_sample_text(s))


def load_dataset(
    root: str,
    dev_user_count: int = DEFAULT_DEV_USERS,
    min_points: int = MIN_POINTS,
) -> Dataset:
    """Load every sample below ``root``; malformed files are skipped and reported.

    Raises :class:`EmptyDataset` when nothing loads and :class:`DuplicateKey`
    when two files map to the same sample key.
    """
    samples: list[DigitSample] = []
    skipped: list[tuple[str, str]] = []
    keys: dict[tuple, str] = {}
    for dirpath, _dirnames, filenames in sorted(os.walk(root)):
        for name in sorted(filenames):
            if not name.endswith(".txt"):
                continue
            path = os.path.join(dirpath, name)
            try:
                sample = load_sample(path, min_points=min_points)
            except (MalformedFile, TooShort, NonMonotonicTime, ValueError) as exc:
                skipped.append((path, str(exc)))
                continue
            if sample.key in keys:
                raise DuplicateKey(
                    f"{path} and {keys[sample.key]} both map to {sample.key}"
                )
            keys[sample.key] = path
            samples.append(sample)
    if not samples:
        raise EmptyDataset(f"no loadable samples under {root!r}")
    return Dataset(
        samples=tuple(samples),
        dev_user_count=dev_user_count,
        skipped=tuple(skipped),
    )


# --- capture interchange (UI <-> service) ----------------------------------

def sample_from_capture(
    payload: Mapping[str, object],
    session: int = 1,
    repetition: int = 1,
    min_points: int = MIN_POINTS,
) -> DigitSample:
    """Build a sample from the capture interchange JSON object.

    Expected shape: ``{"user": str, "digit": int, "points": [{"x","y","t"},...]}``.
    Duplicate consecutive timestamps are collapsed exactly as in the file loader.
    """
    try:
        user = str(payload["user"])
        digit = int(payload["digit"])  # type: ignore[arg-type]
        points = payload["points"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"bad capture payload: {exc}") from None
    if not isinstance(points, Sequence):
        raise MalformedFile("capture 'points' must be a list")
    deduped: list[TouchPoint] = []
    for p in points:
        try:
            tp = TouchPoint(float(p["x"]), float(p["y"]), float(p["t"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"bad capture point {p!r}: {exc}") from None
        if deduped and tp.t == deduped[-1].t:
            continue
        if deduped and tp.t < deduped[-1].t:
            raise NonMonotonicTime(f"timestamp decreases: {deduped[-1].t} -> {tp.t}")
        deduped.append(tp)
    if len(deduped) < min_points:
        raise TooShort(f"{len(deduped)} points after dedup, need {min_points}")
    return DigitSample(user, digit, session, repetition, tuple(deduped))


def capture_payload(s: DigitSample) -> dict:
    """Serialize a sample to the capture interchange JSON object."""
    return {
        "user": s.user_id,
        "digit": s.digit,
        "points": [{"x": p.x, "y": p.y, "t": p.t} for p in s.points],
    }


def capture_json(s: DigitSample) -> str:
    return json.dumps(capture_payload(s))


# --- preprocessing ---------------------------------------------------------

#: Centroid translations snap to this grid so preprocessing is exactly
#: idempotent in floating point: the residual centroid after one pass is
#: below half a grid step, so a second pass translates by zero.
_CENTROID_GRID = 1.0 / 1024.0


def _grid_round(value: float) -> float:
    # round-half-even in grid units keeps boundary values from oscillating
    return round(value / _CENTROID_GRID) * _CENTROID_GRID


def preprocess(s: DigitSample) -> DigitSample:
    """Translate the centroid to the origin and rebase time to t0 = 0.

    Idempotent: a second application returns the sample unchanged.  The
    centroid shift is quantized to 2**-10 device pixels to make that exact.
    """
    n = len(s.points)
    xs = [p.x for p in s.points]
    ys = [p.y for p in s.points]
    t0 = s.points[0].t
    # Iterate the quantized shift to a fixed point: a residual centroid can
    # land exactly on a rounding boundary, in which case one more grid step
    # settles it.  Converges in at most three passes.
    moved = False
    for _ in range(8):
        cx = _grid_round(math.fsum(xs) / n)
        cy = _grid_round(math.fsum(ys) / n)
        if cx == 0.0 and cy == 0.0:
            break
        xs = [x - cx for x in xs]
        ys = [y - cy for y in ys]
        moved = True
    if not moved and t0 == 0.0:
        return s
    return replace(
        s,
        points=tuple(
            TouchPoint(x, y, p.t - t0) for x, y, p in zip(xs, ys, s.points)
        ),
    )
