"""Sequential forward floating search over a finite candidate set.

Greedy subset search that alternates a forward inclusion step with
conditional exclusion steps, minimizing a caller-supplied objective
(typically an equal-error rate).  Used both for per-digit channel selection
and for digit-combination search over password candidates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .errors import EmptyCandidates, NonFiniteObjective

Objective = Callable[[frozenset[int]], float]


@dataclass(frozen=True)
class SelectionStep:
    """One history entry: an add or remove plus the resulting objective."""

    kind: str  # "add" | "remove"
    candidate: int
    objective: float


@dataclass(frozen=True)
class SelectionTrace:
    """Outcome of a floating search.

    ``best_by_size`` records the best objective and subset seen at every
    visited size; ``best_subset``/``best_objective`` is the minimum over the
    admissible sizes, ties broken toward smaller subsets then lexicographic
    order.
    """

    best_subset: frozenset[int]
    best_objective: float
    history: tuple[SelectionStep, ...]
    best_by_size: Mapping[int, tuple[float, frozenset[int]]]

    def to_dict(self) -> dict:
        return {
            "best_subset": sorted(self.best_subset),
            "best_objective": self.best_objective,
            "history": [
                {"kind": s.kind, "candidate": s.candidate, "objective": s.objective}
                for s in self.history
            ],
            "best_by_size": {
                str(k): {"objective": v[0], "subset": sorted(v[1])}
                for k, v in sorted(self.best_by_size.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def sffs_select(
    candidates: Iterable[int],
    objective: Objective,
    max_size: int,
    min_size: int = 1,
    memoize: bool = True,
) -> SelectionTrace:
    """Run the floating search and return the best subset across sizes.

    Each iteration adds the single candidate minimizing the objective
    (ties to the lowest id), then keeps removing elements while the removal
    strictly improves the best recorded objective at the smaller size.  The
    search stops at ``max_size`` or when the best available addition no
    longer improves the recorded best at its size.
    """
    pool = frozenset(int(c) for c in candidates)
    if not pool:
        raise EmptyCandidates("sffs_select needs at least one candidate")
    if not 1 <= min_size <= max_size <= len(pool):
        raise ValueError(
            f"need 1 <= min_size <= max_size <= {len(pool)}, "
            f"got min_size={min_size}, max_size={max_size}"
        )

    cache: dict[frozenset[int], float] = {}

    def evaluate(subset: frozenset[int]) -> float:
        if memoize and subset in cache:
            return cache[subset]
        value = float(objective(subset))
        if not math.isfinite(value):
            raise NonFiniteObjective(f"objective({sorted(subset)}) = {value}")
        if memoize:
            cache[subset] = value
        return value

    history: list[SelectionStep] = []
    best_by_size: dict[int, tuple[float, frozenset[int]]] = {}

    def record(subset: frozenset[int], value: float) -> bool:
        size = len(subset)
        prev = best_by_size.get(size)
        if prev is None or value < prev[0]:
            best_by_size[size] = (value, subset)
            return True
        return False

    current: frozenset[int] = frozenset()
    while len(current) < max_size:
        remaining = sorted(pool - current)
        scored = [(evaluate(current | {c}), c) for c in remaining]
        add_value, add_candidate = min(scored)
        size_after = len(current) + 1
        prev_best = best_by_size.get(size_after)
        if prev_best is not None and add_value >= prev_best[0]:
            break
        current = current | {add_candidate}
        history.append(SelectionStep("add", add_candidate, add_value))
        record(current, add_value)
        just_added: int | None = add_candidate

        while len(current) > max(min_size, 1):
            removals = [(evaluate(current - {r}), r) for r in sorted(current)]
            rm_value, rm_candidate = min(removals)
            if rm_candidate == just_added:
                break
            smaller = len(current) - 1
            prev = best_by_size.get(smaller)
            if prev is not None and rm_value >= prev[0]:
                break
            current = current - {rm_candidate}
            history.append(SelectionStep("remove", rm_candidate, rm_value))
            record(current, rm_value)
            just_added = None  # only the immediately added candidate is protected

    admissible = {
        size: entry
        for size, entry in best_by_size.items()
        if min_size <= size <= max_size
    }
    if not admissible:  # pragma: no cover - at least one add always happens
        raise EmptyCandidates("search recorded no admissible subset")
    best_value = min(v for v, _ in admissible.values())
    tied = [s for v, s in admissible.values() if v == best_value]
    best_subset = min(tied, key=lambda s: (len(s), sorted(s)))
    return SelectionTrace(
        best_subset=best_subset,
        best_objective=best_value,
        history=tuple(history),
        best_by_size=dict(best_by_size),
    )


def exhaustive_select(
    candidates: Iterable[int],
    objective: Objective,
    max_size: int,
    min_size: int = 1,
) -> tuple[frozenset[int], float]:
    """Independent oracle: evaluate every subset with size in range.

    Exponential; only usable for small candidate sets.  Same tie-break rule
    as the floating search (value, then size, then lexicographic order).
    """
    from itertools import combinations

    pool = sorted(int(c) for c in candidates)
    best: tuple[float, int, tuple[int, ...]] | None = None
    for size in range(min_size, max_size + 1):
        for combo in combinations(pool, size):
            value = float(objective(frozenset(combo)))
            key = (value, size, combo)
            if best is None or key < best:
                best = key
    if best is None:
        raise EmptyCandidates("no subsets in the requested size range")
    return frozenset(best[2]), best[0]
