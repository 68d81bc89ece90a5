"""Subspace selection, the subspace detector ensemble, and the tri-state
indicator that marks where the ensemble and the full-space detector disagree.

The ensemble aggregates per-subspace verdicts with max: a point is an
ensemble outlier as soon as any member flags it, so evaluation short-circuits
on the first positive verdict. The full space is never a member; including
it would make one side of the disagreement region empty by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import Dataset, Side, Subspace, TriState, project
from .detectors import DetectorSpec, FittedDetector, calibrate_threshold

# rejection sampling below this subset count falls back to enumeration
_ENUMERABLE = 1 << 21


@dataclass(frozen=True)
class SubspaceEnsemble:
    """Per-subspace fitted detectors over a d-dimensional space, max-aggregated."""

    members: tuple[tuple[Subspace, FittedDetector], ...]
    d: int
    budget: int
    _member_idx: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("ensemble needs at least one member")
        if len(self.members) > self.budget:
            raise ValueError(
                f"{len(self.members)} members exceed budget {self.budget}"
            )
        full = tuple(range(self.d))
        seen = set()
        for s, det in self.members:
            if s.dims[-1] >= self.d:
                raise ValueError(f"subspace {s.dims} invalid for d={self.d}")
            if s.dims == full:
                raise ValueError("the full space must not be an ensemble member")
            if s.dims in seen:
                raise ValueError(f"duplicate subspace {s.dims}")
            seen.add(s.dims)
            if det.train.d != len(s):
                raise ValueError(
                    f"member detector fitted on {det.train.d} columns, "
                    f"subspace has {len(s)}"
                )
        object.__setattr__(
            self,
            "_member_idx",
            tuple(np.asarray(s.dims, dtype=np.intp) for s, _ in self.members),
        )

    def classify(self, query: np.ndarray) -> int:
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.d,):
            raise ValueError(f"query must have shape ({self.d},), got {query.shape}")
        for idx, (_, det) in zip(self._member_idx, self.members):
            if det.classify(query[idx]):
                return 1
        return 0


def select_subspaces(d: int, budget: int, seed=None) -> list[Subspace]:
    """Pick ensemble subspaces: exhaustive when the budget allows, feature
    bagging without repetition otherwise.

    Exhaustive means every non-empty proper subset of the d axes, in a
    deterministic order (by size, then lexicographic). Bagging draws a size
    uniformly from {1, ..., d-1}, then a uniform subset of that size,
    rejecting duplicates.
    """
    if d < 2:
        raise ValueError(f"need d >= 2 to form proper subspaces, got d={d}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    total = (1 << d) - 2
    if total <= budget:
        return [
            Subspace(dims)
            for size in range(1, d)
            for dims in combinations(range(d), size)
        ]

    rng = np.random.default_rng(seed)
    chosen: list[Subspace] = []
    seen: set[tuple[int, ...]] = set()
    attempts = 0
    stall_at = max(10_000, 50 * budget)
    while len(chosen) < budget:
        attempts += 1
        if attempts > stall_at:
            if total > _ENUMERABLE:
                raise RuntimeError(
                    f"subspace sampling stalled at {len(chosen)}/{budget}"
                )
            rest = [
                dims
                for size in range(1, d)
                for dims in combinations(range(d), size)
                if dims not in seen
            ]
            picks = rng.choice(len(rest), size=budget - len(chosen), replace=False)
            chosen.extend(Subspace(rest[i]) for i in sorted(picks))
            break
        size = int(rng.integers(1, d))
        dims = tuple(sorted(int(i) for i in rng.choice(d, size=size, replace=False)))
        if dims in seen:
            continue
        seen.add(dims)
        chosen.append(Subspace(dims))
    return chosen


def fit_ensemble(
    data: Dataset,
    subspaces: list[Subspace],
    spec: DetectorSpec,
    budget: int | None = None,
) -> SubspaceEnsemble:
    """Calibrate one detector per subspace on the projected data."""
    members = tuple(
        (s, calibrate_threshold(spec, project(data, s))) for s in subspaces
    )
    return SubspaceEnsemble(members=members, d=data.d,
                            budget=len(subspaces) if budget is None else budget)


def ensemble_classify(e: SubspaceEnsemble, query: np.ndarray) -> int:
    """Max over member verdicts: 1 as soon as any subspace flags the query."""
    return e.classify(query)


def indicator_f(m, e, query: np.ndarray) -> tuple[TriState, Side | None]:
    """Three-way verdict of the (full-space, ensemble) pair at a point.

    Returns the tri-state value plus, when the two disagree, the side of
    the disagreement: H1 when only the ensemble flags the point, H2 when
    only the full-space detector does. m and e need only expose classify().
    """
    mv = m.classify(query)
    ev = e.classify(query)
    if mv == ev:
        return (TriState.BOTH_OUTLIER if mv else TriState.BOTH_INLIER), None
    return TriState.DISAGREE, (Side.H1 if mv == 0 else Side.H2)
