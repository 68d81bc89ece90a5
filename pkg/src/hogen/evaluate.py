"""Classifier, metrics, statistical testing, pipelines, and the timing bench.

The two pipelines mirror the intended uses of generated outliers:

  - one-class classification: train on inliers only, add synthetic outliers,
    fit a random forest, and score held-out inliers plus all real outliers;
  - supervised detection: a heavily imbalanced train split is rebalanced
    with synthetic outliers before fitting the forest.

Both report per-repeat ROC AUC, the median, and a one-sided Wilcoxon
signed-rank p-value against the relevant unaugmented baseline.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, rankdata
from sklearn.ensemble import RandomForestClassifier

from .baselines import HiddenConfig, hidden_generate, hyperbox_generate
from .bisection import BisectConfig, as_seed_sequence, generate_batch
from .core import Dataset
from .data import GaussianSpec, gen_gaussian_clusters, split_occ, split_sod
from .detectors import DetectorSpec, calibrate_threshold
from .ensemble import fit_ensemble, select_subspaces

GENERATORS = ("bisect", "hidden", "hyperbox", "none")


@dataclass(frozen=True)
class ForestSpec:
    """Random-forest knobs; mtry defaults to floor(sqrt(d)) at train time."""

    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError(f"mtry must be >= 1, got {self.mtry}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")


@dataclass
class Forest:
    """A trained forest scored by the fraction of trees voting outlier."""

    model: RandomForestClassifier
    n_trees: int
    d: int


@dataclass
class EvalResult:
    """Per-repeat AUCs with their median, significance, and outcome flag."""

    auc_per_repeat: list[float]
    median_auc: float
    p_value: float | None
    flag: str = "ok"
    seconds_per_repeat: list[float] = field(default_factory=list)


def forest_train(train: Dataset, spec: ForestSpec | None = None) -> Forest:
    """Fit Gini-split bootstrap trees on a labeled dataset (both classes
    required); mtry features are drawn per split.
    """
    spec = spec or ForestSpec()
    if train.labels is None:
        raise ValueError("forest training requires labels")
    y = train.labels
    if len(np.unique(y)) < 2:
        raise ValueError("forest training requires both classes")
    mtry = spec.mtry if spec.mtry is not None else max(1, int(math.isqrt(train.d)))
    if mtry > train.d:
        raise ValueError(f"mtry={mtry} exceeds d={train.d}")
    model = RandomForestClassifier(
        n_estimators=spec.n_trees,
        criterion="gini",
        max_features=mtry,
        min_samples_leaf=spec.min_leaf,
        bootstrap=True,
        random_state=spec.seed,
        n_jobs=1,
    )
    model.fit(train.points, y)
    return Forest(model=model, n_trees=spec.n_trees, d=train.d)


def forest_proba(forest: Forest, query: np.ndarray):
    """Fraction of trees voting class 1; accepts one point or a batch."""
    query = np.asarray(query, dtype=np.float64)
    single = query.ndim == 1
    if single:
        query = query[None, :]
    if query.shape[1] != forest.d:
        raise ValueError(f"queries must have {forest.d} columns, got {query.shape[1]}")
    votes = np.zeros(query.shape[0])
    for tree in forest.model.estimators_:
        votes += tree.predict(query)
    frac = votes / forest.n_trees
    return float(frac[0]) if single else frac


def roc_auc(scores, labels) -> float:
    """Rank-based ROC AUC (Mann-Whitney statistic) with mid-ranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"length mismatch: {scores.shape} vs {labels.shape}")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC is undefined without both classes")
    ranks = rankdata(scores)
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def _wilcoxon_exact(ranks2: np.ndarray, w2: int, n: int) -> tuple[float, float]:
    """P(W+ >= w) and P(W+ <= w) under the exact sign-flip null.

    ranks2 holds doubled mid-ranks (integers), w2 the doubled observed
    statistic; counts stay below 2**n <= 2**20, exact in float64.
    """
    total = int(ranks2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts += shifted
    denom = 2.0 ** n
    return float(counts[w2:].sum() / denom), float(counts[: w2 + 1].sum() / denom)


def wilcoxon_signed_rank(x, y, alternative: str = "two_sided") -> float:
    """Wilcoxon signed-rank p-value on paired samples.

    Zero differences are dropped; the null distribution is exact (sign-flip
    enumeration over the observed ranks) up to 20 effective pairs and a
    tie-corrected normal approximation beyond. "greater" tests whether x
    tends to exceed y.
    """
    if alternative not in ("greater", "less", "two_sided"):
        raise ValueError(f"unknown alternative {alternative!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 1:
        raise ValueError("x and y must be equal-length 1-D with at least one pair")
    diff = x - y
    diff = diff[diff != 0.0]
    n = diff.size
    if n == 0:
        return 1.0
    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())

    if n <= 20:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        w2 = int(np.rint(2.0 * w_plus))
        p_ge, p_le = _wilcoxon_exact(ranks2, w2, n)
    else:
        mu = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        sigma2 = (n * (n + 1) * (2 * n + 1) / 24.0
                  - float((tie_counts ** 3 - tie_counts).sum()) / 48.0)
        z = (w_plus - mu) / math.sqrt(sigma2)
        p_ge, p_le = float(norm.sf(z)), float(norm.cdf(z))

    if alternative == "greater":
        return p_ge
    if alternative == "less":
        return p_le
    return min(1.0, 2.0 * min(p_ge, p_le))


def _generate(generator: str, train: Dataset, m, e, n_gen: int, *,
              bisect_cfg: BisectConfig, epsilon: float, timeout: float, seed):
    """Dispatch to a generator; returns (points, flag)."""
    if generator == "bisect":
        rep = generate_batch(train, m, e, n_gen, bisect_cfg, seed=seed, timeout=timeout)
        return rep.points, rep.flag
    if generator == "hidden":
        rep = hidden_generate(train, m, e, n_gen,
                              HiddenConfig(epsilon=epsilon, timeout=timeout), seed=seed)
        return rep.points, rep.flag
    if generator == "hyperbox":
        res = hyperbox_generate(train, m, n_gen, seed=seed, timeout=timeout)
        return res.points, ("ot" if res.timed_out else "ok")
    raise ValueError(f"unknown generator {generator!r}")


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def run_occ(
    dataset: Dataset,
    generator: str,
    adversary: DetectorSpec,
    repeats: int = 7,
    seed=None,
    *,
    budget: int = 2048,
    bisect_cfg: BisectConfig | None = None,
    epsilon: float = 0.1,
    timeout: float = 1800.0,
    forest: ForestSpec | None = None,
) -> EvalResult:
    """One-class pipeline: per repeat, split off an inlier-only train set,
    fit the detector pair on it, add as many synthetic outliers as training
    rows, train a forest, and measure test AUC.

    generator "none" skips generation and scores the test set with the
    adversary directly (the unaugmented baseline the p-value compares to).
    """
    if generator not in GENERATORS:
        raise ValueError(f"generator must be one of {GENERATORS}, got {generator!r}")
    bisect_cfg = bisect_cfg or BisectConfig()
    forest = forest or ForestSpec()
    aucs: list[float] = []
    base_aucs: list[float] = []
    seconds: list[float] = []
    flag = "ok"
    for child in as_seed_sequence(seed).spawn(repeats):
        split_seed, sub_seed, gen_seed, forest_seed = child.spawn(4)
        t0 = time.perf_counter()
        train, test = split_occ(dataset, split_seed)
        m = calibrate_threshold(adversary, train)
        base_auc = roc_auc(m.score_many(test.points), test.labels)
        if generator == "none":
            aucs.append(base_auc)
            base_aucs.append(base_auc)
            seconds.append(time.perf_counter() - t0)
            continue
        subs = select_subspaces(train.d, budget, sub_seed)
        e = fit_ensemble(train, subs, adversary)
        gen_points, gen_flag = _generate(
            generator, train, m, e, train.n,
            bisect_cfg=bisect_cfg, epsilon=epsilon, timeout=timeout, seed=gen_seed,
        )
        if gen_flag != "ok":
            flag = "ot"
            seconds.append(time.perf_counter() - t0)
            continue
        aug = Dataset(
            np.vstack([train.points, gen_points]),
            labels=np.concatenate(
                [np.zeros(train.n, dtype=np.int64),
                 np.ones(len(gen_points), dtype=np.int64)]
            ),
        )
        model = forest_train(
            aug, ForestSpec(forest.n_trees, forest.mtry, forest.min_leaf,
                            seed=_seed_int(forest_seed)),
        )
        aucs.append(roc_auc(forest_proba(model, test.points), test.labels))
        base_aucs.append(base_auc)
        seconds.append(time.perf_counter() - t0)

    p_value = None
    if generator != "none" and aucs:
        p_value = wilcoxon_signed_rank(aucs, base_aucs, "greater")
    median = float(np.median(aucs)) if aucs else float("nan")
    return EvalResult(auc_per_repeat=aucs, median_auc=median, p_value=p_value,
                      flag=flag, seconds_per_repeat=seconds)


@dataclass
class SodSplit:
    """One rebalanced supervised repeat, exposed for auditability."""

    train: Dataset
    test: Dataset
    n_generated: int
    flag: str


def build_sod_split(
    d_small: Dataset,
    d_full: Dataset,
    generator: str,
    adversary: DetectorSpec,
    seed=None,
    *,
    budget: int = 2048,
    bisect_cfg: BisectConfig | None = None,
    epsilon: float = 0.1,
    timeout: float = 1800.0,
) -> SodSplit:
    """Split, then top up the train side with synthetic outliers until the
    classes balance; generator "none" returns the raw imbalanced split.
    """
    if generator not in GENERATORS:
        raise ValueError(f"generator must be one of {GENERATORS}, got {generator!r}")
    bisect_cfg = bisect_cfg or BisectConfig()
    seq = as_seed_sequence(seed)
    split_seed, sub_seed, gen_seed = seq.spawn(3)
    train, test = split_sod(d_small, d_full, split_seed)
    if generator == "none":
        return SodSplit(train=train, test=test, n_generated=0, flag="ok")
    n_out = int((train.labels == 1).sum())
    n_gen = train.n - 2 * n_out  # inliers minus real outliers
    if n_gen <= 0:
        return SodSplit(train=train, test=test, n_generated=0, flag="ok")
    m = calibrate_threshold(adversary, train)
    subs = select_subspaces(train.d, budget, sub_seed)
    e = fit_ensemble(train, subs, adversary)
    gen_points, gen_flag = _generate(
        generator, train, m, e, n_gen,
        bisect_cfg=bisect_cfg, epsilon=epsilon, timeout=timeout, seed=gen_seed,
    )
    aug = Dataset(
        np.vstack([train.points, gen_points]),
        labels=np.concatenate([train.labels,
                               np.ones(len(gen_points), dtype=np.int64)]),
        feature_names=train.feature_names,
    ) if len(gen_points) else train
    return SodSplit(train=aug, test=test, n_generated=len(gen_points), flag=gen_flag)


def run_sod(
    d_small: Dataset,
    d_full: Dataset,
    generator: str,
    adversary: DetectorSpec,
    repeats: int = 7,
    seed=None,
    *,
    budget: int = 2048,
    bisect_cfg: BisectConfig | None = None,
    epsilon: float = 0.1,
    timeout: float = 1800.0,
    forest: ForestSpec | None = None,
) -> EvalResult:
    """Supervised pipeline on a downsampled dataset: rebalance each train
    split with synthetic outliers, fit a forest, and score the augmented
    test side. The p-value compares against the unaugmented forest on the
    same splits; generator "none" is that baseline.
    """
    forest = forest or ForestSpec()
    aucs: list[float] = []
    base_aucs: list[float] = []
    seconds: list[float] = []
    flag = "ok"
    for child in as_seed_sequence(seed).spawn(repeats):
        sod_seed, forest_seed, base_forest_seed = child.spawn(3)
        t0 = time.perf_counter()
        split = build_sod_split(
            d_small, d_full, generator, adversary, sod_seed,
            budget=budget, bisect_cfg=bisect_cfg, epsilon=epsilon, timeout=timeout,
        )
        if split.flag != "ok":
            flag = "ot"
            seconds.append(time.perf_counter() - t0)
            continue
        plain = build_sod_split(d_small, d_full, "none", adversary, sod_seed)
        base_model = forest_train(
            plain.train, ForestSpec(forest.n_trees, forest.mtry, forest.min_leaf,
                                    seed=_seed_int(base_forest_seed)),
        )
        base_auc = roc_auc(forest_proba(base_model, plain.test.points),
                           plain.test.labels)
        if generator == "none":
            aucs.append(base_auc)
            base_aucs.append(base_auc)
            seconds.append(time.perf_counter() - t0)
            continue
        model = forest_train(
            split.train, ForestSpec(forest.n_trees, forest.mtry, forest.min_leaf,
                                    seed=_seed_int(forest_seed)),
        )
        aucs.append(roc_auc(forest_proba(model, split.test.points), split.test.labels))
        base_aucs.append(base_auc)
        seconds.append(time.perf_counter() - t0)

    p_value = None
    if generator != "none" and aucs:
        p_value = wilcoxon_signed_rank(aucs, base_aucs, "greater")
    median = float(np.median(aucs)) if aucs else float("nan")
    return EvalResult(auc_per_repeat=aucs, median_auc=median, p_value=p_value,
                      flag=flag, seconds_per_repeat=seconds)


@dataclass
class BenchCell:
    """Timing of one (dataset shape, generator) combination."""

    clusters: int
    d: int
    n: int
    data_seed: int | None
    generator: str
    seconds: float
    points_emitted: int
    restarts: int
    candidates_tried: int
    adversary_cost: float
    flag: str


@dataclass
class BenchResult:
    cells: list[BenchCell]
    summary: dict[str, dict[str, float]]


def _quartile_summary(seconds: list[float]) -> dict[str, float]:
    q = np.percentile(seconds, [0, 25, 50, 75, 100])
    return {
        "min": float(q[0]), "q1": float(q[1]), "q2": float(q[2]),
        "q3": float(q[3]), "max": float(q[4]), "iqr": float(q[3] - q[1]),
    }


def bench_generation(
    grid: list[GaussianSpec],
    generators=("bisect", "hidden"),
    n_samp: int = 500,
    seed=None,
    *,
    adversary: DetectorSpec | None = None,
    budget: int = 2048,
    bisect_cfg: BisectConfig | None = None,
    epsilons=(0.1,),
    timeout: float = 1800.0,
) -> BenchResult:
    """Time each generator over a grid of synthetic datasets, fitting the
    detector pair once per cell. Hypercube sampling runs once per epsilon;
    the summary reports quartiles of the per-cell wall times per generator.
    """
    if not grid:
        raise ValueError("grid must be non-empty")
    adversary = adversary or DetectorSpec(kind="lof")
    bisect_cfg = bisect_cfg or BisectConfig()
    labels = []
    for g in generators:
        if g == "hidden":
            labels.extend(
                "hidden" if len(epsilons) == 1 else f"hidden(eps={eps})"
                for eps in epsilons
            )
        else:
            labels.append(g)

    cells: list[BenchCell] = []
    for gspec, child in zip(grid, as_seed_sequence(seed).spawn(len(grid))):
        sub_seed, gen_seed = child.spawn(2)
        dataset = gen_gaussian_clusters(gspec)
        m = calibrate_threshold(adversary, dataset)
        e = fit_ensemble(dataset, select_subspaces(dataset.d, budget, sub_seed),
                         adversary)
        for g in generators:
            eps_list = epsilons if g == "hidden" else (None,)
            for eps in eps_list:
                label = (g if eps is None or len(epsilons) == 1
                         else f"hidden(eps={eps})")
                if g == "bisect":
                    rep = generate_batch(dataset, m, e, n_samp, bisect_cfg,
                                         seed=gen_seed, timeout=timeout)
                    restarts, cand = rep.restarts, 0
                elif g == "hidden":
                    rep = hidden_generate(
                        dataset, m, e, n_samp,
                        HiddenConfig(epsilon=eps, timeout=timeout), seed=gen_seed,
                    )
                    restarts, cand = 0, rep.candidates_tried
                else:
                    raise ValueError(f"bench supports bisect/hidden, got {g!r}")
                cells.append(BenchCell(
                    clusters=gspec.clusters, d=gspec.d, n=gspec.n,
                    data_seed=gspec.seed, generator=label,
                    seconds=rep.wall_time, points_emitted=len(rep.points),
                    restarts=restarts, candidates_tried=cand,
                    adversary_cost=rep.adversary_inference_cost, flag=rep.flag,
                ))

    summary = {
        label: _quartile_summary([c.seconds for c in cells if c.generator == label])
        for label in labels
    }
    return BenchResult(cells=cells, summary=summary)


def write_results_csv(path, rows: list[dict]) -> None:
    """Flat CSV writer; the first row fixes the column order."""
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_summary_json(path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
