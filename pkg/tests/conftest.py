from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hogen.core import Dataset
from hogen.data import GaussianSpec, gen_gaussian_clusters
from hogen.detectors import DetectorSpec, calibrate_threshold
from hogen.ensemble import fit_ensemble, select_subspaces


class PredicateDetector:
    """Stub detector whose outlier verdict is an arbitrary predicate.

    score is any callable giving larger values for more outlying points;
    classify is score > threshold, mirroring the real detector contract.
    """

    def __init__(self, score_fn, threshold=0.0):
        self._score = score_fn
        self.threshold = threshold

    def score(self, x):
        return float(self._score(np.asarray(x, dtype=float)))

    def classify(self, x):
        return int(self.score(x) > self.threshold)


def interval_detector(lo: float, hi: float) -> PredicateDetector:
    """1-D detector accepting exactly [lo, hi] (uses the first coordinate)."""
    return PredicateDetector(lambda x: max(lo - x[0], x[0] - hi))


def ball_detector(radius: float, center=None) -> PredicateDetector:
    def score(x):
        c = np.zeros_like(x) if center is None else np.asarray(center, dtype=float)
        return float(np.linalg.norm(x - c)) - radius
    return PredicateDetector(score)


def always_outlier() -> PredicateDetector:
    return PredicateDetector(lambda x: 1.0)


def always_inlier() -> PredicateDetector:
    return PredicateDetector(lambda x: -1.0)


@pytest.fixture(scope="session")
def fitted_pair():
    """A small real detector pair: 2-cluster Gaussian data, kNN adversary,
    exhaustive 4-d subspace ensemble.
    """
    data = gen_gaussian_clusters(GaussianSpec(clusters=2, d=4, n=160, seed=7))
    spec = DetectorSpec(kind="knn", k=5)
    m = calibrate_threshold(spec, data)
    e = fit_ensemble(data, select_subspaces(4, budget=14, seed=1), spec)
    return data, m, e
