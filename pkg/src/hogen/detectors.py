"""Full-space outlier detectors: LOF and kNN-distance, with score calibration.

Both detectors score a query against a fixed training set (the query is never
inserted into it) and turn the score into a binary verdict via a threshold
calibrated on the training scores: a point is an outlier iff its score is
strictly above the threshold, so the acceptance region is closed.

LOF conventions, pinned down because duplicates make the textbook formulas
degenerate:
  - the neighborhood of a point is its k nearest training rows *including*
    every row tied at the k-distance;
  - training rows never count themselves as neighbors; queries coinciding
    with a training row still count that row (distance 0);
  - a point whose k-distance is 0 has infinite local reachability density,
    and a query whose own lrd and all neighbor lrds are infinite gets LOF 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import Dataset

_DEFAULT_K = {"lof": 20, "knn": 5}


class DetectorKind(str, enum.Enum):
    LOF = "lof"
    KNN = "knn"


@dataclass(frozen=True)
class DetectorSpec:
    """Detector family plus hyperparameters.

    k defaults to 20 for LOF and 5 for kNN (the dominant library defaults)
    when left unset.
    """

    kind: DetectorKind
    k: int | None = None
    contamination: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", DetectorKind(self.kind))
        if self.k is None:
            object.__setattr__(self, "k", _DEFAULT_K[self.kind.value])
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.contamination <= 0.5:
            raise ValueError(f"contamination must be in (0, 0.5], got {self.contamination}")


@dataclass(frozen=True)
class FittedDetector:
    """A calibrated detector: training data, threshold, and per-row caches.

    train_scores are the leave-self-out scores of the training rows (the
    same values the threshold quantile was computed from). kdist and lrd
    are LOF-only caches used for scoring queries.
    """

    spec: DetectorSpec
    train: Dataset
    threshold: float
    train_scores: np.ndarray
    kdist: np.ndarray | None = None
    lrd: np.ndarray | None = None

    def score(self, query: np.ndarray) -> float:
        return float(self.score_many(np.asarray(query, dtype=np.float64)[None, :])[0])

    def score_many(self, queries: np.ndarray) -> np.ndarray:
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2 or queries.shape[1] != self.train.d:
            raise ValueError(
                f"queries must have shape (m, {self.train.d}), got {queries.shape}"
            )
        if self.spec.kind is DetectorKind.KNN:
            return _knn_query_scores(self, queries)
        return _lof_query_scores(self, queries)

    def classify(self, query: np.ndarray) -> int:
        return int(self.score(query) > self.threshold)

    def classify_many(self, queries: np.ndarray) -> np.ndarray:
        return (self.score_many(queries) > self.threshold).astype(np.int64)


def _train_distance_matrix(points: np.ndarray) -> np.ndarray:
    dist = cdist(points, points)
    np.fill_diagonal(dist, np.inf)  # leave-self-out
    return dist


def _kth_smallest(dist: np.ndarray, k: int) -> np.ndarray:
    return np.partition(dist, k - 1, axis=1)[:, k - 1]


def _lof_from_distances(dist: np.ndarray, k: int, kdist_train: np.ndarray,
                        lrd_train: np.ndarray | None,
                        kdist_scored: np.ndarray | None = None):
    """LOF machinery shared by the in-sample and query paths.

    dist is (m, n) with self-distances already masked to inf on the
    in-sample path. Returns (kdist, lrd, lof) for the m scored points;
    lrd_train is None only on the in-sample path, where the scored points
    are the training rows themselves.
    """
    kdist = _kth_smallest(dist, k) if kdist_scored is None else kdist_scored
    mask = dist <= kdist[:, None]
    counts = mask.sum(axis=1)
    reach = np.maximum(kdist_train[None, :], dist)
    sums = np.where(mask, reach, 0.0).sum(axis=1)
    with np.errstate(divide="ignore"):
        lrd = np.where(sums > 0.0, counts / np.where(sums > 0.0, sums, 1.0), np.inf)
    if lrd_train is None:
        lrd_train = lrd
    neigh_lrd = np.where(mask, lrd_train[None, :], 0.0).sum(axis=1) / counts
    with np.errstate(invalid="ignore"):
        lof = neigh_lrd / lrd
    # own lrd infinite forces every neighbor lrd infinite: LOF defined as 1
    lof = np.where(np.isinf(lrd), 1.0, lof)
    return kdist, lrd, lof


def _knn_query_scores(fitted: FittedDetector, queries: np.ndarray) -> np.ndarray:
    dist = cdist(queries, fitted.train.points)
    return _kth_smallest(dist, fitted.spec.k)


def _lof_query_scores(fitted: FittedDetector, queries: np.ndarray) -> np.ndarray:
    dist = cdist(queries, fitted.train.points)
    _, _, lof = _lof_from_distances(dist, fitted.spec.k, fitted.kdist, fitted.lrd)
    return lof


def knn_score(fitted: FittedDetector, query: np.ndarray) -> float:
    """Distance from the query to its k-th nearest training row."""
    if fitted.spec.kind is not DetectorKind.KNN:
        raise ValueError(f"expected a kNN detector, got {fitted.spec.kind}")
    return fitted.score(query)


def lof_score(fitted: FittedDetector, query: np.ndarray) -> float:
    """Local outlier factor of the query against the training set."""
    if fitted.spec.kind is not DetectorKind.LOF:
        raise ValueError(f"expected a LOF detector, got {fitted.spec.kind}")
    return fitted.score(query)


def classify(fitted: FittedDetector, query: np.ndarray) -> int:
    """1 iff the query scores strictly above the calibrated threshold."""
    return fitted.classify(query)


def calibrate_threshold(spec: DetectorSpec, data: Dataset) -> FittedDetector:
    """Fit a detector and set its threshold at the (1 - contamination)
    quantile (linear interpolation) of the leave-self-out training scores.
    """
    if data.n <= spec.k:
        raise ValueError(
            f"need more than k={spec.k} training rows, got n={data.n}"
        )
    dist = _train_distance_matrix(data.points)
    kdist = lrd = None
    if spec.kind is DetectorKind.KNN:
        scores = _kth_smallest(dist, spec.k)
    else:
        kd = _kth_smallest(dist, spec.k)
        kdist, lrd, scores = _lof_from_distances(dist, spec.k, kd, None, kdist_scored=kd)
    threshold = float(np.quantile(scores, 1.0 - spec.contamination))
    if not np.isfinite(threshold):
        raise ValueError("calibrated threshold is non-finite")
    return FittedDetector(
        spec=spec,
        train=data,
        threshold=threshold,
        train_scores=scores,
        kdist=kdist,
        lrd=lrd,
    )
