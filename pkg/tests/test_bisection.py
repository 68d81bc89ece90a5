from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import (PredicateDetector, always_inlier, always_outlier,
                      ball_detector, interval_detector)
from hogen.bisection import (BisectConfig, Ray, TInterval, _bisect_on_interval,
                             bisect_one, cut_trick_interval, generate_batch,
                             make_ray, sample_direction, select_origin,
                             worst_case_iters)
from hogen.core import Dataset, GenerationError, Side, TriState
from hogen.detectors import DetectorSpec, calibrate_threshold
from hogen.ensemble import indicator_f


def _unit_ray(origin, direction, length):
    return Ray(origin=np.atleast_1d(np.asarray(origin, dtype=float)),
               direction=np.atleast_1d(np.asarray(direction, dtype=float)),
               length=length)


def test_sample_direction_1d_is_sign():
    rng = np.random.default_rng(0)
    vals = {float(sample_direction(1, rng)[0]) for _ in range(50)}
    assert vals <= {1.0, -1.0}
    assert len(vals) == 2


def test_sample_direction_unit_norm():
    rng = np.random.default_rng(1)
    for d in (1, 2, 5, 40):
        v = sample_direction(d, rng)
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-12


def test_sample_direction_symmetry():
    rng = np.random.default_rng(2)
    samples = np.array([sample_direction(3, rng) for _ in range(100_000)])
    means = samples.mean(axis=0)
    assert np.all(np.abs(means) < 0.02)


def test_sample_direction_rejects_zero_dim():
    with pytest.raises(ValueError):
        sample_direction(0, np.random.default_rng(0))


def test_make_ray_length_range():
    data = Dataset(np.array([[2.0, 0.0], [1.0, 0.0]]))  # max norm 2
    rng = np.random.default_rng(3)
    m = always_outlier()  # accepts the first draw every time
    for _ in range(200):
        ray = make_ray(np.zeros(2), data, m, rng)
        assert 1.0 <= ray.length <= 4.0


def test_make_ray_endpoint_outside_acceptance():
    pts = np.vstack([np.random.default_rng(4).uniform(-0.5, 0.5, size=(20, 2)),
                     [[1.0, 0.0]]])  # max norm exactly 1
    data = Dataset(pts)
    m = ball_detector(1.0)
    rng = np.random.default_rng(5)
    ray = make_ray(np.zeros(2), data, m, rng, max_attempts=200)
    endpoint = ray.point_at(ray.length)
    assert np.linalg.norm(endpoint) > 1.0
    assert m.classify(endpoint) == 1


def test_make_ray_signals_new_origin_needed():
    data = Dataset(np.ones((3, 2)))
    rng = np.random.default_rng(6)
    assert make_ray(np.zeros(2), data, always_inlier(), rng, max_attempts=8) is None


def test_select_origin_uniform_when_scores_equal():
    data = Dataset(np.arange(8, dtype=float).reshape(8, 1))
    m = PredicateDetector(lambda x: 0.0, threshold=1.0)
    rng = np.random.default_rng(7)
    draws = np.array([select_origin(data, m, rng)[0] for _ in range(10_000)])
    counts = [int((draws == v).sum()) for v in range(8)]
    assert chisquare(counts).pvalue > 0.01


def test_select_origin_prefers_high_score():
    data = Dataset(np.array([[0.0], [1.0]]))
    m = PredicateDetector(lambda x: x[0], threshold=1.0)  # scores 0 and 1
    rng = np.random.default_rng(8)
    draws = np.array([select_origin(data, m, rng)[0] for _ in range(10_000)])
    assert (draws == 1.0).mean() >= 0.999


def test_select_origin_overweights_fringe_inlier():
    # far decoys soak up the contamination quantile so the fringe point
    # stays an inlier with a clearly above-average score
    rng = np.random.default_rng(9)
    cluster = rng.normal(0, 0.3, size=(40, 2))
    fringe = np.array([[0.8, 0.0]])
    decoys = np.array([[5.0, 5.0], [-5.0, 5.0], [5.0, -5.0]])
    data = Dataset(np.vstack([cluster, fringe, decoys]))
    m = calibrate_threshold(DetectorSpec(kind="knn", k=4, contamination=0.05), data)
    assert m.classify(fringe[0]) == 0
    scores = m.train_scores
    inliers = np.flatnonzero(scores <= m.threshold)
    assert 40 in inliers and not any(i > 40 for i in inliers)
    weights = scores[inliers] - scores[inliers].min() + 1e-9
    probs = weights / weights.sum()
    expected = float(probs[list(inliers).index(40)])
    draws = [select_origin(data, m, rng) for _ in range(4000)]
    freq = np.mean([np.array_equal(p, fringe[0]) for p in draws])
    assert freq > 1.0 / inliers.size  # over-represented vs uniform
    assert abs(freq - expected) < 4.0 * np.sqrt(expected * (1 - expected) / 4000)


def test_select_origin_requires_an_inlier():
    data = Dataset(np.ones((3, 1)))
    with pytest.raises(ValueError, match="no training row"):
        select_origin(data, always_outlier(), np.random.default_rng(0))


def test_cut_trick_single_change():
    ray = _unit_ray([0.0], [1.0], 1.0)
    m = interval_detector(-1.0, 0.45)
    out = cut_trick_interval(ray, m, 5, np.random.default_rng(10))
    assert out.a == pytest.approx(0.4, abs=1e-12)
    assert out.b == pytest.approx(0.6, abs=1e-12)


def test_cut_trick_multiple_changes_uniform():
    # verdicts over the six cuts: 0,0,1,0,1,1 -> flips at three adjacent pairs
    ray = _unit_ray([0.0], [1.0], 1.0)
    m = PredicateDetector(lambda x: 1.0 if (0.3 < x[0] < 0.5 or x[0] > 0.7) else -1.0)
    rng = np.random.default_rng(11)
    seen = {(0.2, 0.4): 0, (0.4, 0.6): 0, (0.6, 0.8): 0}
    for _ in range(3000):
        out = cut_trick_interval(ray, m, 5, rng)
        seen[(round(out.a, 10), round(out.b, 10))] += 1
    assert chisquare(list(seen.values())).pvalue > 0.01


def test_cut_trick_no_change_returns_none():
    ray = _unit_ray([0.0], [1.0], 1.0)
    assert cut_trick_interval(ray, always_inlier(), 5, np.random.default_rng(1)) is None


def test_cut_trick_interval_verdicts_differ():
    rng = np.random.default_rng(12)
    ray = _unit_ray([0.0], [1.0], 1.0)
    for trial in range(25):
        cells = rng.integers(0, 2, size=8)
        m = PredicateDetector(
            lambda x, cells=cells: 1.0 if cells[min(7, int(x[0] * 8))] else -1.0)
        out = cut_trick_interval(ray, m, 7, rng)
        if out is not None:
            assert m.classify(ray.point_at(out.a)) != m.classify(ray.point_at(out.b))


def test_worst_case_iters_values():
    assert worst_case_iters(1.0 / 5.0, 0.05) == 1
    assert worst_case_iters(0.8, 0.4) == 0
    assert worst_case_iters(1.0, 1.0 / 64.0) == 5


def test_worst_case_iters_domain_errors():
    with pytest.raises(ValueError):
        worst_case_iters(0.0, 0.05)
    with pytest.raises(ValueError):
        worst_case_iters(1.0, 0.0)
    with pytest.raises(ValueError):
        worst_case_iters(1.0, 2.0)


def test_bisect_loop_hand_trace():
    # M accepts [0,1], ensemble accepts [0,1.5]; ray x=0.5 toward y=2.0:
    # first midpoint lands at 1.25 where the verdicts differ
    ray = _unit_ray([0.5], [1.0], 1.5)
    m = interval_detector(0.0, 1.0)
    e = interval_detector(0.0, 1.5)
    hit = _bisect_on_interval(ray, m, e, TInterval(0.0, 1.5), err=0.05)
    point, side, iters = hit
    assert point.tolist() == [1.25]
    assert side is Side.H2
    assert iters == 1


def test_bisect_loop_termination_bound_single_crossing():
    # unique boundary crossings on the interval: iterations stay within
    # worst_case_iters(|b-a|, err) + 1
    ray = _unit_ray([0.0], [1.0], 1.0)
    m = interval_detector(-10.0, 0.5)
    e = interval_detector(-10.0, 0.55)
    hit = _bisect_on_interval(ray, m, e, TInterval(0.4, 0.6), err=0.05)
    point, side, iters = hit
    assert 0.5 < point[0] <= 0.55
    assert side is Side.H2
    assert iters <= worst_case_iters(0.2, 0.05) + 1


def test_bisect_one_stub_pair():
    rng = np.random.default_rng(13)
    data = Dataset(np.array([[0.1], [0.5], [0.9]]))
    m = interval_detector(0.0, 1.0)
    e = interval_detector(0.0, 1.5)
    for _ in range(10):
        out = bisect_one(data, m, e, BisectConfig(), rng)
        assert out.side is Side.H2
        assert 1.0 < out.point[0] <= 1.5
        assert indicator_f(m, e, out.point)[0] == TriState.DISAGREE


def test_bisect_one_empty_hidden_region_fails():
    data = Dataset(np.array([[0.1], [0.5], [0.9]]))
    m = interval_detector(0.0, 1.0)
    e = interval_detector(0.0, 1.0)  # identical regions: no disagreement
    cfg = BisectConfig(max_restarts=5)
    with pytest.raises(GenerationError) as err:
        bisect_one(data, m, e, cfg, np.random.default_rng(14))
    assert err.value.restarts == 5


def test_bisect_one_real_pair_validity(fitted_pair):
    data, m, e = fitted_pair
    rng = np.random.default_rng(15)
    for _ in range(10):
        out = bisect_one(data, m, e, BisectConfig(), rng)
        verdict, side = indicator_f(m, e, out.point)
        assert verdict == TriState.DISAGREE
        assert side is out.side
        # side accounting: H1 iff M accepts and the ensemble flags
        mv = m.classify(out.point)
        assert (out.side is Side.H1) == (mv == 0)


def test_generate_batch_deterministic(fitted_pair):
    data, m, e = fitted_pair
    a = generate_batch(data, m, e, 8, BisectConfig(), seed=42)
    b = generate_batch(data, m, e, 8, BisectConfig(), seed=42)
    assert np.array_equal(a.points, b.points)
    assert a.sides == b.sides
    assert a.bisection_iterations == b.bisection_iterations
    assert a.flag == "ok" and len(a.points) == 8


def test_generate_batch_timeout_flag(fitted_pair):
    data, m, e = fitted_pair
    report = generate_batch(data, m, e, 500, BisectConfig(), seed=1, timeout=0.001)
    assert report.flag == "ot"
    assert len(report.points) < 500


def test_generate_batch_parallel_matches_sequential(fitted_pair):
    data, m, e = fitted_pair
    seq = generate_batch(data, m, e, 6, BisectConfig(), seed=5, workers=1)
    par = generate_batch(data, m, e, 6, BisectConfig(), seed=5, workers=2)
    assert np.array_equal(np.sort(seq.points, axis=0), np.sort(par.points, axis=0))


def test_ray_validation():
    with pytest.raises(ValueError, match="unit"):
        _unit_ray([0.0], [2.0], 1.0)
    with pytest.raises(ValueError, match="positive"):
        _unit_ray([0.0], [1.0], 0.0)
    with pytest.raises(ValueError, match="a < b"):
        TInterval(1.0, 1.0)
