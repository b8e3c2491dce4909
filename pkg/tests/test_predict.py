"""Out-of-sample prediction, intervals, folds, coverage and the LRT."""

import math

import numpy as np
import pytest

from heavysar import (
    ErrorScale,
    GeoPoint,
    IntervalPrediction,
    OosSite,
    binomial_lrt,
    boxcox,
    confidence_interval,
    coverage,
    crossval_coverage,
    fit_sar,
    fit_tsar,
    inverse_boxcox,
    kfold_partition,
    knn_proximity,
    normal_quantile,
    oos_predict,
    oos_sigma2,
    oos_weights,
    t_quantile,
)
from heavysar.errors import (
    DegenerateVarianceError,
    DomainError,
    DuplicateLocationError,
    IsolatedSiteError,
    NeighborhoodTooSmallError,
)

EQUATOR = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]])


def simulated_fit(seed=0, n=60, lam=0.5, family="sar", nu=None):
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(24, 49, n), rng.uniform(-125, -66, n)])
    w = knn_proximity(pts, 8)
    x = np.column_stack([np.ones(n), rng.standard_normal(n)])
    y = x @ np.array([1.0, 2.0]) + np.linalg.solve(
        np.eye(n) - lam * w.to_dense(), rng.standard_normal(n)
    )
    if family == "sar":
        fit = fit_sar(y, x, w)
    else:
        fit = fit_tsar(y, x, w, nu=nu)
    return fit, pts, x, y, w


class TestOosWeights:
    def test_single_neighbor_full_weight(self):
        idx, wts = oos_weights((0.0, 0.5), EQUATOR[:1], "knn:1")
        assert list(idx) == [0]
        assert wts == pytest.approx([1.0])

    def test_two_equidistant_halves(self):
        idx, wts = oos_weights((0.0, 0.5), EQUATOR, "knn:2")
        assert sorted(idx.tolist()) == [0, 1]
        assert wts == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_radius_scheme(self):
        idx, wts = oos_weights((0.0, 0.5), EQUATOR, "radius:170")
        assert sorted(idx.tolist()) == [0, 1, 2]
        assert wts.sum() == pytest.approx(1.0, abs=1e-12)
        assert wts[0] == wts[1] > wts[2]

    def test_isolated_site(self):
        with pytest.raises(IsolatedSiteError):
            oos_weights((0.0, 10.0), EQUATOR, "radius:100")

    def test_coincident_site_rejected(self):
        with pytest.raises(DuplicateLocationError):
            oos_weights((0.0, 1.0), EQUATOR, "knn:1")


class TestOosSigma2:
    def test_two_member_spread(self):
        r = np.array([5.0, 0.0, 2.0, 9.0])
        assert oos_sigma2(r, np.array([1, 2])) == pytest.approx(2.0)

    def test_constant_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            oos_sigma2(np.array([3.0, 3.0, 3.0]), np.array([0, 1, 2]))

    def test_shift_invariance(self):
        r = np.array([1.0, 4.0, -2.0, 0.5])
        idx = np.array([0, 2, 3])
        assert oos_sigma2(r + 11.0, idx) == pytest.approx(oos_sigma2(r, idx))

    def test_too_small(self):
        with pytest.raises(NeighborhoodTooSmallError):
            oos_sigma2(np.arange(5.0), np.array([2]))


def make_site(x_o, idx, wts, sigma_o=1.0, lat=0.0, lon=0.5):
    return OosSite(
        location=GeoPoint(lat, lon),
        x_o=np.asarray(x_o, dtype=float),
        neighbor_indices=np.asarray(idx),
        neighbor_weights=np.asarray(wts),
        sigma_o=sigma_o,
    )


class TestOosPredict:
    def test_lambda_zero_linear_part_only(self):
        fit, pts, x, y, _ = simulated_fit(1)
        fit.lam = 0.0
        site = make_site([1.0, 0.7], [0, 1], [0.5, 0.5])
        assert oos_predict(fit, site, y, x) == pytest.approx(fit.beta @ site.x_o)

    def test_zero_neighbor_deviation(self):
        fit, pts, x, y, _ = simulated_fit(2)
        y_exact = x @ fit.beta
        site = make_site([1.0, -0.3], [2, 5], [0.25, 0.75])
        assert oos_predict(fit, site, y_exact, x) == pytest.approx(fit.beta @ site.x_o)

    def test_three_point_hand_formula(self):
        fit, pts, x, y, _ = simulated_fit(3)
        fit.lam = 0.5
        idx = np.array([0, 1, 2])
        wts = np.array([0.2, 0.3, 0.5])
        site = make_site([1.0, 2.0], idx, wts)
        expect = fit.beta @ site.x_o + 0.5 * sum(
            wts[j] * (y[idx[j]] - fit.beta @ x[idx[j]]) for j in range(3)
        )
        assert oos_predict(fit, site, y, x) == pytest.approx(expect, abs=1e-12)

    def test_insample_rows_reproduce_local_predictions(self):
        # the fitted row weights used as oos weights give back fitted values
        fit, pts, x, y, w = simulated_fit(4)
        dense = w.to_dense()
        for i in (0, 7, 23):
            idx = w.neighbors(i)
            site = make_site(x[i], idx, dense[i, idx], lat=pts[i, 0], lon=pts[i, 1])
            point = oos_predict(fit, site, y, x)
            assert point == pytest.approx(fit.fitted[i], abs=1e-10)


class TestConfidenceInterval:
    def test_symmetry(self):
        fit, *_ = simulated_fit(5)
        iv = confidence_interval(3.0, 2.0, fit, 0.1)
        assert iv.hi - iv.point == pytest.approx(iv.point - iv.lo, rel=1e-12)
        assert iv.family == "sar"

    def test_tsar_to_sar_width_ratio(self):
        # matched scale at alpha = 0.01: t(6) against the normal quantile
        sar_fit, *_ = simulated_fit(6, family="sar")
        tsar_fit, *_ = simulated_fit(6, family="tsar", nu=6.0)
        tsar_fit.sigma = sar_fit.sigma
        iv_n = confidence_interval(0.0, 1.0, sar_fit, 0.01)
        iv_t = confidence_interval(0.0, 1.0, tsar_fit, 0.01)
        ratio = (iv_t.hi - iv_t.lo) / (iv_n.hi - iv_n.lo)
        assert ratio == pytest.approx(
            t_quantile(0.995, 6.0) / normal_quantile(0.995), rel=1e-9
        )
        assert ratio == pytest.approx(3.7074 / 2.5758, abs=2e-3)

    def test_extreme_alpha_vanishing_width(self):
        fit, *_ = simulated_fit(7)
        iv = confidence_interval(1.0, 1.0, fit, 0.9999)
        assert iv.hi - iv.lo < 1e-3 * fit.sigma

    def test_interval_nesting(self):
        fit, *_ = simulated_fit(8)
        wide = confidence_interval(0.5, 1.5, fit, 0.01)
        narrow = confidence_interval(0.5, 1.5, fit, 0.1)
        assert wide.lo <= narrow.lo <= narrow.hi <= wide.hi

    def test_domain(self):
        fit, *_ = simulated_fit(9)
        with pytest.raises(DomainError):
            confidence_interval(0.0, 1.0, fit, 0.0)
        with pytest.raises(DomainError):
            confidence_interval(0.0, -1.0, fit, 0.1)


class TestKfoldPartition:
    def test_singleton_folds(self):
        labels = kfold_partition(10, folds=10, seed=3)
        assert sorted(labels.tolist()) == list(range(10))

    def test_sizes_differ_by_at_most_one(self):
        labels = kfold_partition(103, folds=10, seed=1)
        counts = np.bincount(labels, minlength=10)
        assert counts.max() - counts.min() <= 1

    def test_deterministic(self):
        a = kfold_partition(50, folds=5, seed=42)
        b = kfold_partition(50, folds=5, seed=42)
        assert np.array_equal(a, b)
        c = kfold_partition(50, folds=5, seed=43)
        assert not np.array_equal(a, c)

    def test_domain(self):
        with pytest.raises(DomainError):
            kfold_partition(5, folds=1)
        with pytest.raises(DomainError):
            kfold_partition(3, folds=10)


class TestCoverage:
    def iv(self, lo, hi):
        return IntervalPrediction(point=(lo + hi) / 2, lo=lo, hi=hi,
                                  alpha=0.1, family="sar")

    def test_all_inside(self):
        assert coverage([0.0, 1.0], [self.iv(-1, 1), self.iv(0, 2)]) == 1.0

    def test_none_inside(self):
        assert coverage([5.0, -5.0], [self.iv(-1, 1), self.iv(0, 2)]) == 0.0

    def test_half(self):
        ivs = [self.iv(-1, 1), self.iv(0, 2), self.iv(3, 4), self.iv(6, 7)]
        assert coverage([0.0, 1.0, 10.0, -10.0], ivs) == 0.5


class TestBinomialLrt:
    def test_exact_null_count(self):
        stat, p = binomial_lrt(5, 100, 0.05)
        assert stat == 0.0
        assert p == 1.0

    def test_large_sample_anchor(self):
        # 1542 predictions with 32 outside a 99% interval
        stat, p = binomial_lrt(32, 1542, 0.01)
        assert 0.0001 <= p <= 0.0004

    def test_zero_count_boundary(self):
        stat, p = binomial_lrt(0, 100, 0.05)
        assert stat == pytest.approx(-2 * 100 * math.log(0.95), rel=1e-12)
        assert p == pytest.approx(0.00136, abs=2e-5)

    def test_monotone_in_distance_from_null(self):
        n, alpha = 400, 0.05
        null_k = int(alpha * n)
        up = [binomial_lrt(k, n, alpha)[1] for k in range(null_k, n // 4)]
        assert all(b < a for a, b in zip(up, up[1:]))
        down = [binomial_lrt(k, n, alpha)[1] for k in range(null_k, -1, -1)]
        assert all(b < a for a, b in zip(down, down[1:]))

    def test_domain(self):
        with pytest.raises(DomainError):
            binomial_lrt(-1, 10, 0.05)
        with pytest.raises(DomainError):
            binomial_lrt(3, 10, 0.0)


class TestBackTransformCoherence:
    def test_monotone_endpoint_mapping_preserves_coverage(self):
        rng = np.random.default_rng(11)
        m, l = 10.0, 1.0 / 3.0
        y_orig = rng.uniform(1.0, 50.0, 40)
        y_model = boxcox(y_orig, m, l)
        ivs, ivs_orig = [], []
        for i in range(40):
            c = y_model[i] + rng.normal(0, 0.5)
            half = abs(rng.normal(0, 0.6))
            ivs.append(IntervalPrediction(point=c, lo=c - half, hi=c + half,
                                          alpha=0.1, family="sar"))
            lo, pt, hi = inverse_boxcox(np.array([c - half, c, c + half]), m, l)
            ivs_orig.append(IntervalPrediction(point=pt, lo=lo, hi=hi,
                                               alpha=0.1, family="sar",
                                               scale="original"))
        assert coverage(y_model, ivs) == coverage(y_orig, ivs_orig)


class TestCrossvalCoverage:
    def test_small_run_structure(self):
        rng = np.random.default_rng(21)
        n = 120
        pts = np.column_stack([rng.uniform(24, 49, n), rng.uniform(-125, -66, n)])
        w = knn_proximity(pts, 8)
        x = np.column_stack([np.ones(n), rng.standard_normal(n)])
        y = x @ np.array([1.0, 2.0]) + np.linalg.solve(
            np.eye(n) - 0.5 * w.to_dense(), rng.standard_t(4.0, n)
        )
        report = crossval_coverage(
            pts, x, y, scheme="knn:8", families=("sar", "tsar"),
            folds=4, seed=5, alphas=(0.1, 0.01), nu=4.0,
        )
        assert len(report.rows) == 4
        for row in report.rows:
            assert row.n == n
            assert 0.5 <= row.coverage <= 1.0
            assert 0.0 <= row.p_value <= 1.0
        # same seed reproduces bit-identically
        again = crossval_coverage(
            pts, x, y, scheme="knn:8", families=("sar", "tsar"),
            folds=4, seed=5, alphas=(0.1, 0.01), nu=4.0,
        )
        assert again.rows == report.rows
