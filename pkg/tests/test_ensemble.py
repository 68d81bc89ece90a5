from __future__ import annotations

import numpy as np
import pytest

import oracles
from hogen.core import Dataset, Side, Subspace, TriState, project
from hogen.detectors import DetectorSpec, FittedDetector, calibrate_threshold
from hogen.ensemble import (SubspaceEnsemble, ensemble_classify, fit_ensemble,
                            indicator_f, select_subspaces)


def _forced_member(dims, verdict):
    """A 1-member detector returning a fixed verdict for every query."""
    spec = DetectorSpec(kind="knn", k=1)
    train = Dataset(np.zeros((1, len(dims))))
    threshold = -1.0 if verdict == 1 else np.inf
    det = FittedDetector(spec=spec, train=train, threshold=threshold,
                         train_scores=np.zeros(1))
    return Subspace(dims), det


def test_select_subspaces_exhaustive_d3():
    subs = select_subspaces(3, budget=2048, seed=0)
    assert [s.dims for s in subs] == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]


def test_select_subspaces_exhaustive_ignores_seed():
    a = select_subspaces(4, budget=100, seed=1)
    b = select_subspaces(4, budget=100, seed=999)
    assert [s.dims for s in a] == [s.dims for s in b]
    assert len(a) == 2 ** 4 - 2


def test_select_subspaces_d2_small():
    subs = select_subspaces(2, budget=10)
    assert [s.dims for s in subs] == [(0,), (1,)]


def test_select_subspaces_bagging_budget():
    subs = select_subspaces(30, budget=2048, seed=42)
    dims = [s.dims for s in subs]
    assert len(dims) == 2048
    assert len(set(dims)) == 2048
    full = tuple(range(30))
    assert all(d != full for d in dims)
    assert all(1 <= len(d) <= 29 for d in dims)


def test_select_subspaces_bagging_near_total():
    # budget close to the number of proper subsets forces the fallback
    subs = select_subspaces(4, budget=13, seed=5)
    dims = [s.dims for s in subs]
    assert len(dims) == 13
    assert len(set(dims)) == 13


def test_select_subspaces_rejects_degenerate_dimension():
    with pytest.raises(ValueError, match="d >= 2"):
        select_subspaces(1, budget=5)


def test_fit_ensemble_single_axis_uses_marginal_only():
    rng = np.random.default_rng(8)
    pts = np.column_stack([rng.normal(0, 1, 200), rng.normal(0, 1, 200)])
    data = Dataset(pts)
    spec = DetectorSpec(kind="knn", k=5)
    e = fit_ensemble(data, [Subspace((0,))], spec)
    # moving the query along axis 1 cannot change the verdict
    q1 = np.array([0.0, 0.0])
    q2 = np.array([0.0, 1000.0])
    assert e.classify(q1) == e.classify(q2)


def test_fit_ensemble_deterministic():
    rng = np.random.default_rng(10)
    data = Dataset(rng.normal(size=(60, 3)))
    spec = DetectorSpec(kind="lof", k=5)
    subs = select_subspaces(3, budget=10)
    e1 = fit_ensemble(data, subs, spec)
    e2 = fit_ensemble(data, subs, spec)
    assert [d.threshold for _, d in e1.members] == [d.threshold for _, d in e2.members]


def test_fit_ensemble_matches_per_projection_calibration():
    rng = np.random.default_rng(12)
    grid = np.array([[float(i % 5), float(i // 5 % 5), float(i // 25)]
                     for i in range(75)]) + rng.normal(0, 0.01, (75, 3))
    data = Dataset(grid)
    spec = DetectorSpec(kind="knn", k=4)
    subs = select_subspaces(3, budget=2048)
    e = fit_ensemble(data, subs, spec)
    assert len(e.members) == 6
    for s, det in e.members:
        assert np.isfinite(det.threshold)
        again = calibrate_threshold(spec, project(data, s))
        assert det.threshold == again.threshold


def test_ensemble_classify_max_aggregation():
    all_zero = SubspaceEnsemble(
        members=(_forced_member((0,), 0), _forced_member((1,), 0)), d=2, budget=2)
    assert ensemble_classify(all_zero, np.zeros(2)) == 0
    one_hot = SubspaceEnsemble(
        members=(_forced_member((0,), 0), _forced_member((1,), 1)), d=2, budget=2)
    assert ensemble_classify(one_hot, np.zeros(2)) == 1


def test_ensemble_classify_equals_exists_one():
    rng = np.random.default_rng(3)
    for _ in range(20):
        verdicts = rng.integers(0, 2, size=4)
        e = SubspaceEnsemble(
            members=tuple(_forced_member((i,), int(v)) for i, v in enumerate(verdicts)),
            d=4, budget=4)
        assert e.classify(np.zeros(4)) == int(verdicts.max())


def test_ensemble_rejects_full_space_and_duplicates():
    with pytest.raises(ValueError, match="full space"):
        SubspaceEnsemble(members=(_forced_member((0, 1), 0),), d=2, budget=1)
    with pytest.raises(ValueError, match="duplicate"):
        SubspaceEnsemble(
            members=(_forced_member((0,), 0), _forced_member((0,), 1)),
            d=2, budget=2)


def test_indicator_case_table():
    m1 = _forced_member((0, 1), 1)[1]
    m0 = _forced_member((0, 1), 0)[1]
    e1 = SubspaceEnsemble(members=(_forced_member((0,), 1),), d=2, budget=1)
    e0 = SubspaceEnsemble(members=(_forced_member((0,), 0),), d=2, budget=1)
    q = np.zeros(2)
    assert indicator_f(m1, e1, q) == (TriState.BOTH_OUTLIER, None)
    assert indicator_f(m0, e0, q) == (TriState.BOTH_INLIER, None)
    assert indicator_f(m0, e1, q) == (TriState.DISAGREE, Side.H1)
    assert indicator_f(m1, e0, q) == (TriState.DISAGREE, Side.H2)


def test_marginal_outlier_hidden_from_full_space():
    # four wide axes mask a narrow fifth: a point extreme only in the narrow
    # marginal stays inside typical full-space neighbor distances
    rng = np.random.default_rng(18)
    pts = np.column_stack([rng.normal(0, 5.0, size=(300, 4)),
                           rng.normal(0, 1.0, size=300)])
    data = Dataset(pts)
    spec = DetectorSpec(kind="knn", k=5)
    m = calibrate_threshold(spec, data)
    e = fit_ensemble(data, select_subspaces(5, budget=2048), spec)
    q = np.array([0.0, 0.0, 0.0, 0.0, 4.0])
    # brute-force check of the two verdicts backing the construction
    train = pts.tolist()
    full_score = oracles.knn_query(train, 5, q.tolist())
    axis4 = [[row[4]] for row in train]
    marg_score = oracles.knn_query(axis4, 5, [4.0])
    marg_tau = oracles.quantile_linear(
        [oracles.knn_train_row(axis4, 5, i) for i in range(300)], 0.9)
    assert full_score <= m.threshold
    assert marg_score > marg_tau
    assert m.classify(q) == 0
    assert e.classify(q) == 1
    assert indicator_f(m, e, q) == (TriState.DISAGREE, Side.H1)
