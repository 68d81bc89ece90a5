"""Hidden-outlier generation by bisection along random rays.

A generation attempt walks a ray from an inlier training row out past the
full-space decision boundary, slices the ray into equal segments to find one
whose endpoints get different full-space verdicts (the cut trick), then
bisects inside that segment on the tri-state indicator until it lands on a
point where the full-space detector and the subspace ensemble disagree.

The bisection loop exits only on an exact disagreement; the error tolerance
enters through the worst-case iteration count, which caps the loop. A capped
or dead-ended attempt restarts from a fresh origin rather than failing.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, GenerationError, Side, TriState, max_norm
from .ensemble import indicator_f

_WEIGHTINGS = ("increasing", "decreasing", "uniform")


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Accept ints, None, or an already-spawned SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


@dataclass(frozen=True)
class Ray:
    """A segment from an inlier origin to a point past the decision boundary.

    Callers must ensure the origin is a training row the full-space detector
    accepts and that the endpoint at parameter `length` is rejected; the
    direction is unit-norm, so the parameter measures arc length.
    """

    origin: np.ndarray
    direction: np.ndarray
    length: float

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")

    def point_at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class TInterval:
    """A ray-parameter interval whose endpoints get different full-space verdicts."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class BisectConfig:
    """Knobs for the generator; the defaults mirror the evaluated setup."""

    n_cuts: int = 5
    err: float = 0.05
    max_restarts: int = 50
    max_ray_attempts: int = 16
    origin_weighting: str = "increasing"
    timeout: float = 1800.0

    def __post_init__(self):
        if self.n_cuts < 1:
            raise ValueError(f"n_cuts must be >= 1, got {self.n_cuts}")
        if not self.err > 0:
            raise ValueError(f"err must be positive, got {self.err}")
        if self.max_restarts < 0:
            raise ValueError(f"max_restarts must be >= 0, got {self.max_restarts}")
        if self.max_ray_attempts < 1:
            raise ValueError(f"max_ray_attempts must be >= 1, got {self.max_ray_attempts}")
        if self.origin_weighting not in _WEIGHTINGS:
            raise ValueError(
                f"origin_weighting must be one of {_WEIGHTINGS}, "
                f"got {self.origin_weighting!r}"
            )
        if not self.timeout > 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")


@dataclass
class BisectOutcome:
    """One generated point with its disagreement side and effort counters."""

    point: np.ndarray
    side: Side
    iterations: int
    restarts: int


@dataclass
class GenerationReport:
    """Batch output: the points, their sides, and effort/cost accounting."""

    points: np.ndarray
    sides: list[Side]
    restarts: int
    bisection_iterations: list[int]
    wall_time: float
    adversary_inference_cost: float
    candidates_tried: int = 0
    flag: str = "ok"


def sample_direction(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vector on the (d-1)-sphere."""
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    while True:
        v = rng.standard_normal(d)
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            return v / norm


def make_ray(
    origin: np.ndarray,
    data: Dataset,
    m,
    rng: np.random.Generator,
    max_attempts: int = 16,
) -> Ray | None:
    """Draw (direction, length) pairs until the ray endpoint is rejected by m.

    The length is l + Unif(-l/2, l) for l the largest row norm, i.e. between
    half and twice the data radius. Returns None when max_attempts draws all
    land inside the acceptance region, signalling the caller to restart from
    a new origin. The origin must already be accepted by m.
    """
    origin = np.asarray(origin, dtype=np.float64)
    l = max_norm(data)
    if l <= 0.0:
        raise ValueError("degenerate data: every row is at the origin")
    for _ in range(max_attempts):
        v = sample_direction(data.d, rng)
        length = l + rng.uniform(-l / 2.0, l)
        if m.classify(origin + length * v) == 1:
            return Ray(origin=origin, direction=v, length=float(length))
    return None


def _origin_pool(data: Dataset, m, weighting: str = "increasing"):
    """Inlier row indices and their selection probabilities.

    Weights shift the scores so the smallest inlier weight is delta=1e-9;
    "increasing" favors near-boundary origins (higher score = more weight).
    """
    if getattr(m, "train", None) is data and getattr(m, "train_scores", None) is not None:
        scores = m.train_scores
    elif hasattr(m, "score_many"):
        scores = m.score_many(data.points)
    else:
        scores = np.array([float(m.score(row)) for row in data.points])
    if hasattr(m, "threshold"):
        inlier = scores <= m.threshold
    else:
        inlier = np.array([m.classify(row) == 0 for row in data.points])
    idx = np.flatnonzero(inlier)
    if idx.size == 0:
        raise ValueError("no training row is accepted by the detector")
    delta = 1e-9
    s = scores[idx]
    if weighting == "increasing":
        w = s - s.min() + delta
    elif weighting == "decreasing":
        w = s.max() - s + delta
    else:
        w = np.ones(idx.size)
    return idx, w / w.sum()


def select_origin(
    data: Dataset, m, rng: np.random.Generator, weighting: str = "increasing"
) -> np.ndarray:
    """Pick a generation origin among accepted training rows, weighted by score."""
    idx, probs = _origin_pool(data, m, weighting)
    return data.points[int(rng.choice(idx, p=probs))]


def cut_trick_interval(
    ray: Ray, m, n_cuts: int, rng: np.random.Generator
) -> TInterval | None:
    """Slice the ray at n_cuts+1 equally spaced parameters and return one
    adjacent pair (chosen uniformly) whose full-space verdicts differ, or
    None when every cut agrees.
    """
    if n_cuts < 1:
        raise ValueError(f"n_cuts must be >= 1, got {n_cuts}")
    ts = np.linspace(0.0, ray.length, n_cuts + 1)
    checks = [m.classify(ray.point_at(t)) for t in ts]
    flips = [i for i in range(1, len(ts)) if checks[i] != checks[i - 1]]
    if not flips:
        return None
    i = flips[int(rng.integers(len(flips)))]
    return TInterval(a=float(ts[i - 1]), b=float(ts[i]))


def worst_case_iters(interval_length: float, err: float) -> int:
    """Worst-case bisection iterations to localize within err on the interval:
    the nearest integer of log2(interval_length / err) - 1, floored at 0.
    """
    if not interval_length > 0:
        raise ValueError(f"interval_length must be positive, got {interval_length}")
    if not 0 < err < interval_length:
        raise ValueError(
            f"err must be in (0, interval_length), got err={err}, "
            f"interval_length={interval_length}"
        )
    x = math.log2(interval_length / err) - 1.0
    return max(0, int(math.floor(x + 0.5)))


def _bisect_on_interval(ray: Ray, m, e, interval: TInterval, err: float):
    """Bisection on the tri-state indicator over the interval; None on cap breach.

    The midpoint replaces whichever endpoint shares its indicator value, so
    the active interval always keeps endpoints with differing verdicts.
    """
    a, b = interval.a, interval.b
    cap = (worst_case_iters(b - a, err) if err < b - a else 0) + 8
    fa, _ = indicator_f(m, e, ray.point_at(a))
    c = 0.5 * (a + b)
    fc, side = indicator_f(m, e, ray.point_at(c))
    iters = 1
    while fc != TriState.DISAGREE:
        if iters >= cap:
            return None
        if fa == fc:
            a = c
        else:
            b = c
        c = 0.5 * (a + b)
        fc, side = indicator_f(m, e, ray.point_at(c))
        iters += 1
    return ray.point_at(c), side, iters


def bisect_one(
    data: Dataset,
    m,
    e,
    cfg: BisectConfig | None = None,
    rng: np.random.Generator | None = None,
    origin_pool=None,
) -> BisectOutcome:
    """Generate one hidden outlier: origin, ray, cut trick, then bisection.

    A failed ray draw, an agreeing set of cuts, or a capped bisection each
    trigger a restart from a fresh origin, up to cfg.max_restarts.
    """
    cfg = cfg or BisectConfig()
    rng = rng if rng is not None else np.random.default_rng()
    idx, probs = origin_pool if origin_pool is not None else _origin_pool(
        data, m, cfg.origin_weighting
    )
    reasons: Counter = Counter()
    for attempt in range(cfg.max_restarts + 1):
        origin = data.points[int(rng.choice(idx, p=probs))]
        ray = make_ray(origin, data, m, rng, cfg.max_ray_attempts)
        if ray is None:
            reasons["no_ray"] += 1
            continue
        interval = cut_trick_interval(ray, m, cfg.n_cuts, rng)
        if interval is None:
            reasons["no_interval"] += 1
            continue
        hit = _bisect_on_interval(ray, m, e, interval, cfg.err)
        if hit is None:
            reasons["iteration_cap"] += 1
            continue
        point, side, iters = hit
        return BisectOutcome(point=point, side=side, iterations=iters, restarts=attempt)
    raise GenerationError(
        f"no hidden outlier after {cfg.max_restarts} restarts "
        f"(failure counts: {dict(reasons)})",
        restarts=cfg.max_restarts,
        diagnostics=dict(reasons),
    )


def measure_adversary_cost(m, data: Dataset, max_rows: int = 64) -> float:
    """Average wall seconds of one classify() call, measured on training rows."""
    rows = data.points[: min(data.n, max_rows)]
    start = time.perf_counter()
    for row in rows:
        m.classify(row)
    return (time.perf_counter() - start) / len(rows)


_WORKER: dict = {}


def _init_worker(data, m, e, cfg):
    _WORKER.update(
        data=data, m=m, e=e, cfg=cfg,
        pool=_origin_pool(data, m, cfg.origin_weighting),
    )


def _worker_point(child_seed):
    rng = np.random.default_rng(child_seed)
    out = bisect_one(
        _WORKER["data"], _WORKER["m"], _WORKER["e"], _WORKER["cfg"], rng,
        origin_pool=_WORKER["pool"],
    )
    return out.point, out.side, out.iterations, out.restarts


def generate_batch(
    data: Dataset,
    m,
    e,
    n_samp: int,
    cfg: BisectConfig | None = None,
    seed=None,
    timeout: float | None = None,
    workers: int = 1,
) -> GenerationReport:
    """Generate n_samp hidden outliers with per-point RNG streams spawned
    from the seed, so the result is reproducible and independent of worker
    count. Exceeding the timeout yields a partial report flagged "ot".
    """
    if n_samp < 1:
        raise ValueError(f"n_samp must be >= 1, got {n_samp}")
    cfg = cfg or BisectConfig()
    timeout = cfg.timeout if timeout is None else timeout
    start = time.perf_counter()
    deadline = start + timeout
    children = as_seed_sequence(seed).spawn(n_samp)

    results: list[tuple] = []
    flag = "ok"
    if workers <= 1:
        pool = _origin_pool(data, m, cfg.origin_weighting)
        for child in children:
            if time.perf_counter() > deadline:
                flag = "ot"
                break
            rng = np.random.default_rng(child)
            out = bisect_one(data, m, e, cfg, rng, origin_pool=pool)
            results.append((out.point, out.side, out.iterations, out.restarts))
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(data, m, e, cfg)
        ) as ex:
            futures = {ex.submit(_worker_point, child): i
                       for i, child in enumerate(children)}
            done, pending = wait(
                futures, timeout=max(0.0, deadline - time.perf_counter()),
                return_when=FIRST_EXCEPTION,
            )
            if pending:
                for fut in pending:
                    fut.cancel()
                flag = "ot"
            by_index = sorted((futures[f], f) for f in done if not f.cancelled())
            results = [f.result() for _, f in by_index]

    points = (np.array([r[0] for r in results])
              if results else np.empty((0, data.d)))
    report = GenerationReport(
        points=points,
        sides=[r[1] for r in results],
        restarts=sum(r[3] for r in results),
        bisection_iterations=[r[2] for r in results],
        wall_time=time.perf_counter() - start,
        adversary_inference_cost=measure_adversary_cost(m, data),
        flag=flag,
    )
    return report
