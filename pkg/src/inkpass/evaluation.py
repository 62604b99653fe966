"""Verification protocol and metrics.

Builds genuine/impostor score pools (enrolment from session 1, probes from
session 2, same-digit attackers), computes EER and DET curves, sweeps
password length and enrolment count, and searches digit combinations.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .capture import Dataset, preprocess
from .dtw import score_pair
from .errors import BadLength, EmptyPool, MissingData, ModeMismatch
from .features import FunctionMatrix, FunctionSubset, extract_normalized
from .sffs import SelectionTrace, sffs_select

PairScorer = Callable[[FunctionMatrix, FunctionMatrix], float]

MAX_PASSWORD_LENGTH = 8
MAX_DIGIT_REPEATS = 4  # only 4 probe samples exist per digit and session


# --- score pools -----------------------------------------------------------

@dataclass(frozen=True)
class ScoreSet:
    """Genuine and impostor similarity scores for one operating condition."""

    genuine: tuple[float, ...]
    impostor: tuple[float, ...]

    def __post_init__(self):
        for name, pool in (("genuine", self.genuine), ("impostor", self.impostor)):
            arr = tuple(float(v) for v in pool)
            for v in arr:
                if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                    raise ValueError(f"{name} score out of [0,1]: {v}")
            object.__setattr__(self, name, arr)


class EerResult(NamedTuple):
    eer: float  # percent
    threshold: float


class DetPoint(NamedTuple):
    threshold: float
    far: float
    frr: float


def _pool_arrays(s: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    if not s.genuine or not s.impostor:
        raise EmptyPool("both score pools must be non-empty")
    return (np.sort(np.asarray(s.genuine, dtype=np.float64)),
            np.sort(np.asarray(s.impostor, dtype=np.float64)))


def det_points(s: ScoreSet) -> tuple[DetPoint, ...]:
    """FAR/FRR at every distinct score, thresholds ascending."""
    gen, imp = _pool_arrays(s)
    thresholds = np.unique(np.concatenate([gen, imp]))
    far = (imp.size - np.searchsorted(imp, thresholds, side="left")) / imp.size
    frr = np.searchsorted(gen, thresholds, side="left") / gen.size
    return tuple(DetPoint(float(t), float(a), float(r))
                 for t, a, r in zip(thresholds, far, frr))


def compute_eer(s: ScoreSet) -> EerResult:
    """Operating point where FAR and FRR meet, swept over observed scores.

    FAR(t) counts impostor scores >= t, FRR(t) genuine scores < t.  The
    reported rate is the mean of the two at the threshold minimizing their
    gap; the lowest such threshold wins ties.
    """
    gen, imp = _pool_arrays(s)
    thresholds = np.unique(np.concatenate([gen, imp]))
    far = (imp.size - np.searchsorted(imp, thresholds, side="left")) / imp.size
    frr = np.searchsorted(gen, thresholds, side="left") / gen.size
    i = int(np.argmin(np.abs(far - frr)))  # argmin takes the first minimum
    return EerResult(eer=float((far[i] + frr[i]) / 2.0 * 100.0),
                     threshold=float(thresholds[i]))


def fuse(per_digit_scores: Sequence[float]) -> float:
    """Order-free mean of one attempt's per-digit scores."""
    if not per_digit_scores:
        raise EmptyPool("cannot fuse an empty score list")
    return math.fsum(per_digit_scores) / len(per_digit_scores)


# --- systems ---------------------------------------------------------------

@dataclass(frozen=True)
class System:
    """A named family of pairwise scorers, one per digit."""

    name: str
    scorers: tuple[PairScorer, ...]

    def __post_init__(self):
        if len(self.scorers) != 10:
            raise ValueError(f"need one scorer per digit, got {len(self.scorers)}")

    def scorer(self, digit: int) -> PairScorer:
        return self.scorers[digit]

    @classmethod
    def uniform(cls, name: str, fn: PairScorer) -> "System":
        return cls(name=name, scorers=(fn,) * 10)


def dtw_baseline_system() -> System:
    """DTW over the fixed position/velocity/acceleration channel set."""
    fn = partial(score_pair, subset=FunctionSubset.baseline())
    return System.uniform("dtw-baseline", fn)


def dtw_adapted_system(subsets: Mapping[int, FunctionSubset]) -> System:
    """DTW with a per-digit channel subset (output of select_functions)."""
    scorers = tuple(
        partial(score_pair, subset=subsets[d]) for d in range(10)
    )
    return System(name="dtw-adapted", scorers=scorers)


def normalized_matrices(ds: Dataset) -> dict[tuple, FunctionMatrix]:
    """Preprocess + extract + z-normalize every sample once, keyed by sample."""
    return {s.key: extract_normalized(preprocess(s)) for s in ds.samples}


# --- per-digit score tables ------------------------------------------------

@dataclass(frozen=True)
class DigitScoreTable:
    """Every template-vs-probe score for one digit over the chosen users.

    ``genuine[u, r]`` scores user u's session-2 repetition r+1 against their
    own template.  ``impostor[u, a, r]`` scores attacker a's session-2
    repetition r+1 against user u's template (diagonal is NaN).
    """

    digit: int
    n_enrol: int
    users: tuple[str, ...]
    genuine: np.ndarray
    impostor: np.ndarray

    def __post_init__(self):
        self.genuine.setflags(write=False)
        self.impostor.setflags(write=False)

    def pools(self) -> ScoreSet:
        """The one-digit protocol pools: all genuine reps, first impostor rep."""
        u = len(self.users)
        gen = tuple(float(v) for v in self.genuine.ravel())
        imp = tuple(
            float(self.impostor[i, a, 0])
            for i in range(u) for a in range(u) if a != i
        )
        return ScoreSet(genuine=gen, impostor=imp)


def _matrix_for(matrices, key):
    try:
        return matrices[key]
    except KeyError:
        raise MissingData(f"no sample for {key}") from None


def build_digit_table(
    ds: Dataset,
    system: System,
    digit: int,
    n_enrol: int,
    matrices: Mapping[tuple, FunctionMatrix] | None = None,
    users: Sequence[str] | None = None,
    impostor_reps: int = 4,
) -> DigitScoreTable:
    """Score every probe of one digit against every user's template.

    ``users`` defaults to the evaluation split.  Templates take the first
    ``n_enrol`` session-1 repetitions; probes are session-2 repetitions
    1..4 (genuine) and 1..``impostor_reps`` (attackers).
    """
    if not 1 <= n_enrol <= 4:
        raise ValueError(f"n_enrol must be 1..4, got {n_enrol}")
    if not 1 <= impostor_reps <= 4:
        raise ValueError(f"impostor_reps must be 1..4, got {impostor_reps}")
    chosen = tuple(users) if users is not None else ds.eval_users
    if len(chosen) < 2:
        raise MissingData("need at least 2 users to form impostor pairs")
    if matrices is None:
        matrices = normalized_matrices(ds.subset(chosen))
    scorer = system.scorer(digit)

    templates = []
    for user in chosen:
        enrol = [_matrix_for(matrices, (user, digit, 1, r))
                 for r in range(1, n_enrol + 1)]
        templates.append(enrol)

    def template_score(ti: int, probe: FunctionMatrix) -> float:
        return math.fsum(scorer(e, probe) for e in templates[ti]) / len(templates[ti])

    u = len(chosen)
    probes = [
        [_matrix_for(matrices, (user, digit, 2, r)) for r in range(1, 5)]
        for user in chosen
    ]
    genuine = np.empty((u, 4))
    impostor = np.full((u, u, impostor_reps), np.nan)
    for i in range(u):
        for r in range(4):
            genuine[i, r] = template_score(i, probes[i][r])
        for a in range(u):
            if a == i:
                continue
            for r in range(impostor_reps):
                impostor[i, a, r] = template_score(i, probes[a][r])
    return DigitScoreTable(
        digit=digit, n_enrol=n_enrol, users=chosen,
        genuine=genuine, impostor=impostor,
    )


def build_score_pools(
    ds: Dataset,
    system: System,
    digit: int,
    n_enrol: int,
    matrices: Mapping[tuple, FunctionMatrix] | None = None,
    users: Sequence[str] | None = None,
) -> ScoreSet:
    """One digit's genuine/impostor pools under the session-based protocol."""
    table = build_digit_table(
        ds, system, digit, n_enrol,
        matrices=matrices, users=users, impostor_reps=1,
    )
    return table.pools()


# --- reports ---------------------------------------------------------------

class PasswordCell(NamedTuple):
    n_enrol: int
    length: int
    eer: float
    multiset: tuple[int, ...]


@dataclass(frozen=True)
class EvalReport:
    """Per-digit EER table plus optional password-search results."""

    system: str
    n_enrol: int
    per_digit_eer: tuple[float, ...]
    per_digit_threshold: tuple[float, ...]
    det: tuple[DetPoint, ...]
    subsets: Mapping[int, tuple[int, ...]] | None = None
    password_results: tuple[PasswordCell, ...] = ()
    digits: tuple[int, ...] = tuple(range(10))

    @property
    def mean_eer(self) -> float:
        return math.fsum(self.per_digit_eer) / len(self.per_digit_eer)

    def to_dict(self) -> dict:
        return {
            "config": {
                "system": self.system,
                "n_enrol": self.n_enrol,
                "digits": list(self.digits),
                "subsets": (
                    {str(d): list(v) for d, v in sorted(self.subsets.items())}
                    if self.subsets is not None else None
                ),
            },
            "per_digit_eer": list(self.per_digit_eer),
            "per_digit_threshold": list(self.per_digit_threshold),
            "mean_eer": self.mean_eer,
            "det_points": [[p.threshold, p.far, p.frr] for p in self.det],
            "password_results": [
                {"n_enrol": c.n_enrol, "length": c.length,
                 "eer": c.eer, "multiset": list(c.multiset)}
                for c in self.password_results
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def report_from_dict(blob: Mapping) -> EvalReport:
    """Inverse of :meth:`EvalReport.to_dict`."""
    config = blob["config"]
    subsets = config.get("subsets")
    return EvalReport(
        system=config["system"],
        n_enrol=config["n_enrol"],
        digits=tuple(config.get("digits", range(10))),
        per_digit_eer=tuple(blob["per_digit_eer"]),
        per_digit_threshold=tuple(blob["per_digit_threshold"]),
        det=tuple(DetPoint(*p) for p in blob["det_points"]),
        subsets=(
            {int(d): tuple(v) for d, v in subsets.items()}
            if subsets is not None else None
        ),
        password_results=tuple(
            PasswordCell(n_enrol=c["n_enrol"], length=c["length"],
                         eer=c["eer"], multiset=tuple(c["multiset"]))
            for c in blob["password_results"]
        ),
    )


def load_report(path: str) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def run_digit_table(
    ds: Dataset,
    system: System,
    n_enrol: int,
    matrices: Mapping[tuple, FunctionMatrix] | None = None,
    users: Sequence[str] | None = None,
    subsets: Mapping[int, FunctionSubset] | None = None,
    digits: Sequence[int] | None = None,
) -> EvalReport:
    """EER per digit (all ten by default); DET points pooled over them."""
    chosen_digits = tuple(sorted(set(digits))) if digits is not None else tuple(range(10))
    if not chosen_digits or any(not 0 <= d <= 9 for d in chosen_digits):
        raise ValueError(f"digits must be a non-empty subset of 0..9")
    if matrices is None:
        chosen = tuple(users) if users is not None else ds.eval_users
        matrices = normalized_matrices(ds.subset(chosen))
    eers, thresholds = [], []
    all_gen: list[float] = []
    all_imp: list[float] = []
    for digit in chosen_digits:
        pools = build_score_pools(
            ds, system, digit, n_enrol, matrices=matrices, users=users)
        res = compute_eer(pools)
        eers.append(res.eer)
        thresholds.append(res.threshold)
        all_gen.extend(pools.genuine)
        all_imp.extend(pools.impostor)
    pooled = ScoreSet(genuine=tuple(all_gen), impostor=tuple(all_imp))
    return EvalReport(
        system=system.name,
        n_enrol=n_enrol,
        per_digit_eer=tuple(eers),
        per_digit_threshold=tuple(thresholds),
        det=det_points(pooled),
        subsets=(
            {d: tuple(sorted(s.mask)) for d, s in subsets.items()}
            if subsets is not None else None
        ),
        digits=chosen_digits,
    )


def write_digit_csv(report: EvalReport, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["digit", "eer_percent", "threshold"])
        for i, d in enumerate(report.digits):
            w.writerow([d, report.per_digit_eer[i], report.per_digit_threshold[i]])


def write_password_csv(cells: Iterable[PasswordCell], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_enrol", "length", "eer_percent", "digits"])
        for c in cells:
            w.writerow([c.n_enrol, c.length, c.eer, " ".join(map(str, c.multiset))])


# --- channel selection -----------------------------------------------------

def select_functions(
    ds: Dataset,
    digit: int,
    n_enrol: int = 1,
    max_size: int = 21,
    matrices: Mapping[tuple, FunctionMatrix] | None = None,
    users: Sequence[str] | None = None,
) -> SelectionTrace:
    """Floating search over the 21 channels, minimizing one digit's EER.

    Runs on the development split by default, one-to-one comparisons.
    """
    chosen = tuple(users) if users is not None else ds.dev_users
    if matrices is None:
        matrices = normalized_matrices(ds.subset(chosen))

    def objective(channels) -> float:
        subset = FunctionSubset.from_iterable(channels)
        system = System.uniform("probe", partial(score_pair, subset=subset))
        pools = build_score_pools(
            ds, system, digit, n_enrol, matrices=matrices, users=chosen)
        return compute_eer(pools).eer

    return sffs_select(set(range(1, 22)), objective, max_size=max_size)


def adapted_subsets(
    ds: Dataset,
    n_enrol: int = 1,
    max_size: int = 21,
    matrices: Mapping[tuple, FunctionMatrix] | None = None,
    users: Sequence[str] | None = None,
) -> dict[int, FunctionSubset]:
    """Per-digit channel subsets from the development-split floating search."""
    chosen = tuple(users) if users is not None else ds.dev_users
    if matrices is None:
        matrices = normalized_matrices(ds.subset(chosen))
    out = {}
    for digit in range(10):
        trace = select_functions(
            ds, digit, n_enrol=n_enrol, max_size=max_size,
            matrices=matrices, users=chosen)
        out[digit] = FunctionSubset.from_iterable(trace.best_subset)
    return out


# --- password fusion and search --------------------------------------------

def _canonical_multiset(digits: Sequence[int]) -> tuple[int, ...]:
    ms = tuple(sorted(int(d) for d in digits))
    if not 1 <= len(ms) <= MAX_PASSWORD_LENGTH:
        raise BadLength(f"password length must be 1..{MAX_PASSWORD_LENGTH}")
    for d in ms:
        if not 0 <= d <= 9:
            raise ValueError(f"digit out of range: {d}")
    for d in set(ms):
        if ms.count(d) > MAX_DIGIT_REPEATS:
            raise BadLength(f"digit {d} repeated more than {MAX_DIGIT_REPEATS} times")
    return ms


def fuse_password(
    tables: Mapping[int, DigitScoreTable], digits: Sequence[int]
) -> ScoreSet:
    """Fused pools for a digit multiset under the repetition-rotation rule.

    Genuine attempt j (of 4) scores the k-th occurrence of a digit with the
    user's session-2 repetition ((j+k) mod 4)+1, so repeated digits use
    distinct probe samples within one attempt.  Each attacker mounts one
    fused attempt, spending their repetitions in occurrence order.
    """
    ms = _canonical_multiset(digits)
    occurrences = [(d, k) for d in sorted(set(ms)) for k in range(ms.count(d))]
    used = [tables[d] for d, _ in occurrences if d in tables]
    if len(used) != len(occurrences):
        missing = sorted({d for d, _ in occurrences} - set(tables))
        raise MissingData(f"no score table for digits {missing}")
    users = used[0].users
    for t in used:
        if t.users != users:
            raise MissingData("score tables cover different user sets")
        if t.impostor.shape[2] < max(k for _, k in occurrences) + 1:
            raise MissingData(
                f"digit {t.digit} table lacks impostor repetitions for this multiset")

    u = len(users)
    gen = np.zeros((u, 4))
    for j in range(4):
        cols = [tables[d].genuine[:, (j + k) % 4] for d, k in occurrences]
        gen[:, j] = np.mean(cols, axis=0)
    imp = np.mean([tables[d].impostor[:, :, k] for d, k in occurrences], axis=0)
    imp_flat = tuple(
        float(imp[i, a]) for i in range(u) for a in range(u) if a != i
    )
    return ScoreSet(genuine=tuple(float(v) for v in gen.ravel()),
                    impostor=imp_flat)


class PasswordSearch(NamedTuple):
    multiset: tuple[int, ...]
    eer: float
    threshold: float
    mode: str
    evaluated: int


def _all_multisets(length: int) -> Iterable[tuple[int, ...]]:
    for combo in itertools.combinations_with_replacement(range(10), length):
        if all(combo.count(d) <= MAX_DIGIT_REPEATS for d in set(combo)):
            yield combo


def search_passwords(
    tables: Mapping[int, DigitScoreTable],
    length: int,
    mode: str = "exhaustive",
) -> PasswordSearch:
    """Best digit multiset of the given length, by fused EER.

    Exhaustive enumeration covers lengths below 6 (the candidate space stays
    small); longer passwords go through the floating search over 40
    digit-occurrence pseudo-candidates.
    """
    if not 1 <= length <= MAX_PASSWORD_LENGTH:
        raise BadLength(f"password length must be 1..{MAX_PASSWORD_LENGTH}")
    if mode == "exhaustive":
        if length >= 6:
            raise ModeMismatch("exhaustive search is limited to lengths below 6")
        best: tuple[float, tuple[int, ...], float] | None = None
        evaluated = 0
        for ms in _all_multisets(length):
            res = compute_eer(fuse_password(tables, ms))
            evaluated += 1
            if best is None or res.eer < best[0]:
                best = (res.eer, ms, res.threshold)
        assert best is not None
        return PasswordSearch(multiset=best[1], eer=best[0],
                              threshold=best[2], mode=mode, evaluated=evaluated)
    if mode != "sffs":
        raise ValueError(f"unknown search mode {mode!r}")

    # candidate id encodes (digit, occurrence): occurrences express repeats
    def to_multiset(subset) -> tuple[int, ...]:
        return tuple(sorted((c - 1) // 4 for c in subset))

    memo: dict[tuple[int, ...], float] = {}

    def objective(subset) -> float:
        ms = to_multiset(subset)
        if ms not in memo:
            memo[ms] = compute_eer(fuse_password(tables, ms)).eer
        return memo[ms]

    trace = sffs_select(set(range(1, 41)), objective, max_size=length)
    entry = trace.best_by_size.get(length)
    if entry is None:
        # the floating search stopped early; finish the walk greedily
        size = max(s for s in trace.best_by_size if s < length)
        subset = set(trace.best_by_size[size][1])
        while len(subset) < length:
            scored = [
                (objective(subset | {c}), c)
                for c in sorted(set(range(1, 41)) - subset)
            ]
            _, add = min(scored)
            subset.add(add)
        ms = to_multiset(subset)
    else:
        ms = to_multiset(entry[1])
    res = compute_eer(fuse_password(tables, ms))
    return PasswordSearch(multiset=ms, eer=res.eer, threshold=res.threshold,
                          mode=mode, evaluated=len(memo))


# --- the 4-digit password population ---------------------------------------

def permutation_count(multiset: Sequence[int]) -> int:
    """Distinct ordered passwords spelling this multiset."""
    n = math.factorial(len(multiset))
    for d in set(multiset):
        n //= math.factorial(list(multiset).count(d))
    return n


def weighted_percentile(
    values: Sequence[float], weights: Sequence[int], q: float
) -> float:
    """Smallest value v with cumulative weight >= q * total, values sorted."""
    total = sum(weights)
    cum = 0
    for v, w in zip(values, weights):
        cum += w
        if cum >= q * total:
            return v
    return values[-1]


@dataclass(frozen=True)
class PinDistribution:
    """EER statistics over every 4-digit password, weighted by orderings."""

    entries: tuple[tuple[tuple[int, ...], float, int], ...]  # (multiset, eer, weight)
    q1: float
    median: float
    q3: float
    minimum: float
    maximum: float
    total_ordered: int
    outlier_low: float
    outlier_high: float
    outlier_count: int

    def band_count(self, low: float, high: float) -> int:
        """Ordered passwords whose EER falls inside [low, high]."""
        return sum(w for _, eer, w in self.entries if low <= eer <= high)

    def eer_by_multiset(self) -> dict[tuple[int, ...], float]:
        return {ms: eer for ms, eer, _ in self.entries}

    def to_dict(self) -> dict:
        return {
            "quartiles": [self.q1, self.median, self.q3],
            "minimum": self.minimum,
            "maximum": self.maximum,
            "total_ordered": self.total_ordered,
            "outlier_bounds": [self.outlier_low, self.outlier_high],
            "outlier_count": self.outlier_count,
            "entries": [
                {"digits": list(ms), "eer": eer, "orderings": w}
                for ms, eer, w in self.entries
            ],
        }


def pin_distribution(tables: Mapping[int, DigitScoreTable]) -> PinDistribution:
    """Evaluate all 715 four-digit multisets; quartiles weight by orderings."""
    scored = []
    for ms in _all_multisets(4):
        eer = compute_eer(fuse_password(tables, ms)).eer
        scored.append((ms, eer, permutation_count(ms)))
    scored.sort(key=lambda e: (e[1], e[0]))
    values = [e[1] for e in scored]
    weights = [e[2] for e in scored]
    total = sum(weights)
    q1 = weighted_percentile(values, weights, 0.25)
    med = weighted_percentile(values, weights, 0.50)
    q3 = weighted_percentile(values, weights, 0.75)
    iqr = q3 - q1
    low, high = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = sum(w for v, w in zip(values, weights) if v < low or v > high)
    return PinDistribution(
        entries=tuple(scored),
        q1=q1, median=med, q3=q3,
        minimum=values[0], maximum=values[-1],
        total_ordered=total,
        outlier_low=low, outlier_high=high,
        outlier_count=outliers,
    )
