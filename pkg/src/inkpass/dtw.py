"""Elastic matching of function matrices and template scoring.

The dynamic program aligns two sequences over a channel subset with
Euclidean local cost and unit-weight steps (1,0), (0,1), (1,1), anchored at
both endpoints.  The similarity is exp(-D/K) where D is the minimal
accumulated distance and K the cell count of one optimal warping path
(diagonal steps win ties during backtracking, which pins K down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyTemplate, NotNormalized, SubsetEmpty
from .features import FunctionMatrix, FunctionSubset

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


def _accumulate_py(cost: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    acc = np.empty_like(cost)
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost[i, j] + best
    return acc


if _HAVE_NUMBA:
    # identical statement order to the pure-python version, so both produce
    # bit-equal accumulated costs
    _accumulate = njit(cache=False)(_accumulate_py)
else:  # pragma: no cover
    _accumulate = _accumulate_py


@dataclass(frozen=True)
class DtwResult:
    """Alignment outcome: accumulated distance, path cell count, similarity."""

    D: float
    K: int
    score: float

    def __post_init__(self):
        if self.D < 0:
            raise ValueError(f"negative accumulated distance {self.D}")
        if self.K < 1:
            raise ValueError(f"path length must be positive, got {self.K}")


@dataclass(frozen=True)
class Template:
    """Per-user, per-digit enrolment set of normalized function matrices."""

    user_id: str
    digit: int
    enrolment: tuple[FunctionMatrix, ...]

    def __post_init__(self):
        if not 0 <= self.digit <= 9:
            raise ValueError(f"digit out of range: {self.digit}")
        enrol = tuple(self.enrolment)
        if not 1 <= len(enrol) <= 4:
            raise ValueError(f"enrolment size must be 1..4, got {len(enrol)}")
        for m in enrol:
            if not m.normalized:
                raise NotNormalized("enrolment matrices must be z-normalized")
        object.__setattr__(self, "enrolment", enrol)


def local_cost_matrix(
    a: FunctionMatrix, b: FunctionMatrix, subset: FunctionSubset
) -> np.ndarray:
    """Pairwise Euclidean distances over the subset channels, shape (N_A, N_B)."""
    va = np.ascontiguousarray(a.select(subset).T)
    vb = np.ascontiguousarray(b.select(subset).T)
    return cdist(va, vb, metric="euclidean")


def _backtrack_length(acc: np.ndarray) -> int:
    """Cell count of one optimal path; diagonal predecessors win ties."""
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    k = 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            best = min(diag, up, left)
            if diag == best:
                i -= 1
                j -= 1
            elif up == best:
                i -= 1
            else:
                j -= 1
        k += 1
    return k


def dtw_match(
    a: FunctionMatrix, b: FunctionMatrix, subset: FunctionSubset
) -> DtwResult:
    """Align two normalized matrices over the subset channels."""
    if not isinstance(subset, FunctionSubset) or len(subset) == 0:
        raise SubsetEmpty("channel subset must be a non-empty FunctionSubset")
    if not (a.normalized and b.normalized):
        raise NotNormalized("dtw_match requires z-normalized matrices")
    cost = local_cost_matrix(a, b, subset)
    return dtw_from_costs(cost)


def dtw_from_costs(cost: np.ndarray) -> DtwResult:
    """Run the dynamic program on a precomputed local-cost matrix."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] == 0 or cost.shape[1] == 0:
        raise ValueError(f"cost matrix must be 2-D and non-empty, got {cost.shape}")
    acc = _accumulate(cost)
    d = float(acc[-1, -1])
    k = _backtrack_length(acc)
    return DtwResult(D=d, K=k, score=float(np.exp(-d / k)))


def score_pair(
    a: FunctionMatrix, b: FunctionMatrix, subset: FunctionSubset
) -> float:
    return dtw_match(a, b, subset).score


def score_against_template(
    template: Template, probe: FunctionMatrix, subset: FunctionSubset
) -> float:
    """Mean pairwise similarity between the probe and every enrolment sample."""
    if not template.enrolment:
        raise EmptyTemplate("template holds no enrolment samples")
    if not probe.normalized:
        raise NotNormalized("probe matrix must be z-normalized")
    scores = [dtw_match(e, probe, subset).score for e in template.enrolment]
    # fsum keeps the mean independent of enrolment order, bit for bit
    return math.fsum(scores) / len(scores)


def brute_force_dtw(cost: np.ndarray) -> float:
    """Independent oracle: minimum over every monotone anchored path.

    Exponential enumeration; only usable for tiny grids.  Accumulates costs
    in path order so the optimum is bit-identical to the dynamic program.
    """
    return _enumerate_paths(cost)[0]


def brute_force_path_lengths(cost: np.ndarray) -> frozenset[int]:
    """Cell counts of every path attaining the brute-force optimum."""
    return _enumerate_paths(cost)[1]


def _enumerate_paths(cost: np.ndarray) -> tuple[float, frozenset[int]]:
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    best = [np.inf]
    lengths: set[int] = set()

    def walk(i: int, j: int, total: float, cells: int) -> None:
        total = total + cost[i, j]
        cells += 1
        if i == n - 1 and j == m - 1:
            if total < best[0]:
                best[0] = total
                lengths.clear()
            if total == best[0]:
                lengths.add(cells)
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, total, cells)
        if i + 1 < n:
            walk(i + 1, j, total, cells)
        if j + 1 < m:
            walk(i, j + 1, total, cells)

    walk(0, 0, 0.0, 0)
    return best[0], frozenset(lengths)
