"""Competing generators: hypercube rejection sampling around training rows,
and bounding-box rejection through the full-space detector.

The hypercube sampler accepts a candidate under exactly the same predicate
as the bisection generator (full-space and ensemble verdicts disagree), so
their timings are directly comparable. The bounding-box sampler only keeps
full-space outliers; it is a naive reference for the evaluation pipelines.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import Dataset, TriState
from .bisection import GenerationReport, measure_adversary_cost
from .ensemble import indicator_f


@dataclass(frozen=True)
class HiddenConfig:
    """Hypercube sampler knobs: lateral size factor and time budget."""

    epsilon: float = 0.1
    timeout: float = 1800.0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not self.timeout > 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")


@dataclass
class HyperboxResult:
    """Kept bounding-box candidates plus effort accounting."""

    points: np.ndarray
    candidates_tried: int
    wall_time: float
    timed_out: bool


def hidden_generate(
    data: Dataset,
    m,
    e,
    n_samp: int,
    cfg: HiddenConfig | None = None,
    seed=None,
) -> GenerationReport:
    """Rejection-sample hidden outliers from hypercubes around training rows.

    Each candidate is drawn uniformly from an axis-aligned hypercube of
    lateral size epsilon * range centered on a uniformly chosen training
    row, where range is the largest per-dimension spread of the data. A
    candidate is kept iff the two detectors disagree on it.
    """
    if n_samp < 1:
        raise ValueError(f"n_samp must be >= 1, got {n_samp}")
    cfg = cfg or HiddenConfig()
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    deadline = start + cfg.timeout

    spread = float((data.points.max(axis=0) - data.points.min(axis=0)).max())
    half = cfg.epsilon * spread / 2.0

    points, sides = [], []
    candidates = 0
    flag = "ok"
    while len(points) < n_samp:
        if time.perf_counter() > deadline:
            flag = "ot"
            break
        center = data.points[int(rng.integers(data.n))]
        cand = center + rng.uniform(-half, half, size=data.d)
        candidates += 1
        verdict, side = indicator_f(m, e, cand)
        if verdict == TriState.DISAGREE:
            points.append(cand)
            sides.append(side)

    return GenerationReport(
        points=np.array(points) if points else np.empty((0, data.d)),
        sides=sides,
        restarts=0,
        bisection_iterations=[],
        wall_time=time.perf_counter() - start,
        adversary_inference_cost=measure_adversary_cost(m, data),
        candidates_tried=candidates,
        flag=flag,
    )


def hyperbox_generate(
    data: Dataset,
    m,
    n_samp: int,
    seed=None,
    timeout: float = 1800.0,
) -> HyperboxResult:
    """Sample the per-dimension bounding box of the data uniformly and keep
    the points the full-space detector rejects (verdict 1). Zero-width
    dimensions stay constant.
    """
    if n_samp < 1:
        raise ValueError(f"n_samp must be >= 1, got {n_samp}")
    lo = data.points.min(axis=0)
    hi = data.points.max(axis=0)
    if not np.any(hi > lo):
        raise ValueError("degenerate data: bounding box has zero volume in every dimension")
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    deadline = start + timeout

    kept: list[np.ndarray] = []
    candidates = 0
    timed_out = False
    block = 256
    while len(kept) < n_samp:
        if time.perf_counter() > deadline:
            timed_out = True
            break
        cands = rng.uniform(lo, hi, size=(block, data.d))
        if hasattr(m, "classify_many"):
            verdicts = np.asarray(m.classify_many(cands))
        else:
            verdicts = np.array([m.classify(c) for c in cands])
        taken = block
        for i in np.flatnonzero(verdicts == 1):
            kept.append(cands[i])
            if len(kept) == n_samp:
                taken = int(i) + 1
                break
        candidates += taken

    return HyperboxResult(
        points=np.array(kept) if kept else np.empty((0, data.d)),
        candidates_tried=candidates,
        wall_time=time.perf_counter() - start,
        timed_out=timed_out,
    )
