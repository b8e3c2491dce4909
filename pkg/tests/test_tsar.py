"""tSAR likelihood, gradient, scale estimator and nested fitting."""

import math

import numpy as np
import pytest
from scipy import sparse, stats

from heavysar import (
    ErrorScale,
    ProximityMatrix,
    fit_sar,
    fit_tsar,
    gls_beta,
    knn_proximity,
    s_hat,
    sar_nll,
    sar_sigma2,
    tsar_beta_gradient,
    tsar_beta_inference,
    tsar_nll,
    tsar_sigma2,
)
from heavysar.errors import DomainError
from heavysar.sar import LAMBDA_BOUND
from heavysar.tsar import _tsar_profile_value
from heavysar.sar import ProfileWork


def random_instance(seed, n=5, p=2, lam=0.4, nu=4.0):
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(0, 30, n), rng.uniform(0, 30, n)])
    w = knn_proximity(pts, min(3, n - 1))
    x = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    beta = rng.uniform(-2, 2, p)
    d = rng.uniform(0.5, 3.0, n)
    eps = np.sqrt(d) * rng.standard_t(nu, n)
    a = np.eye(n) - lam * w.to_dense()
    y = x @ beta + np.linalg.solve(a, eps)
    return y, x, w, ErrorScale(diag=d), beta


class TestTsarNll:
    def test_single_point_cauchy_center(self):
        w = ProximityMatrix(sparse.csr_matrix((1, 1)), scheme="custom")
        nll = tsar_nll(
            np.zeros(1), np.ones((1, 1)), np.zeros(1), 0.0, 1.0, 1.0,
            w, ErrorScale.identity(1),
        )
        assert nll == pytest.approx(math.log(math.pi), rel=1e-12)

    def test_independence_case(self):
        y, x, w, _, _ = random_instance(0)
        beta = np.array([0.3, -0.8])
        sigma, nu = 1.4, 5.0
        nll = tsar_nll(y, x, beta, 0.0, sigma, nu, w, ErrorScale.identity(5))
        expect = -stats.t.logpdf(y - x @ beta, nu, scale=sigma).sum()
        assert nll == pytest.approx(expect, rel=1e-12)

    def test_change_of_variables_oracle(self):
        # independently assembled: Jacobian determinant times marginal t densities
        for seed in range(10):
            y, x, w, scale, beta = random_instance(seed, n=3)
            rng = np.random.default_rng(seed + 1000)
            lam = rng.uniform(-0.9, 0.9)
            sigma = rng.uniform(0.4, 2.0)
            nu = rng.uniform(2.5, 15.0)
            m = np.diag(1.0 / np.sqrt(scale.diag)) @ (np.eye(3) - lam * w.to_dense())
            z = m @ (y - x @ beta)
            expect = -math.log(abs(np.linalg.det(m))) - stats.t.logpdf(
                z, nu, scale=sigma
            ).sum()
            got = tsar_nll(y, x, beta, lam, sigma, nu, w, scale)
            assert got == pytest.approx(expect, abs=1e-8)

    def test_domain_checks(self):
        y, x, w, scale, beta = random_instance(1)
        with pytest.raises(DomainError):
            tsar_nll(y, x, beta, 0.0, -1.0, 4.0, w, scale)
        with pytest.raises(DomainError):
            tsar_nll(y, x, beta, 0.0, 1.0, 0.0, w, scale)


class TestTsarBetaGradient:
    def test_zero_residuals_zero_gradient(self):
        y, x, w, scale, _ = random_instance(2)
        beta0 = np.array([1.0, 2.0])
        grad = tsar_beta_gradient(x @ beta0, x, beta0, 0.4, 1.0, 4.0, w, scale)
        assert np.array_equal(grad, np.zeros(2))

    def test_finite_difference_oracle(self):
        h = 1e-6
        for seed in range(20):
            y, x, w, scale, beta = random_instance(seed, n=6, p=3)
            rng = np.random.default_rng(seed + 2000)
            lam = rng.uniform(-0.8, 0.8)
            sigma = rng.uniform(0.5, 1.8)
            nu = rng.uniform(3.0, 12.0)
            point = beta + rng.uniform(-0.5, 0.5, beta.size)
            grad = tsar_beta_gradient(y, x, point, lam, sigma, nu, w, scale)
            for j in range(point.size):
                up, dn = point.copy(), point.copy()
                up[j] += h
                dn[j] -= h
                fd = (
                    tsar_nll(y, x, up, lam, sigma, nu, w, scale)
                    - tsar_nll(y, x, dn, lam, sigma, nu, w, scale)
                ) / (2 * h)
                assert grad[j] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_near_gaussian_stationarity_at_gls(self):
        y, x, w, scale, _ = random_instance(3, n=60, nu=50.0, lam=0.0)
        beta = gls_beta(y, x, 0.0, w, scale)
        sigma = math.sqrt(sar_sigma2(y, x, beta, 0.0, w, scale))
        grad = tsar_beta_gradient(y, x, beta, 0.0, sigma, 1e6, w, scale)
        assert np.abs(grad).max() < 1e-3


class TestTsarSigma2:
    def test_nu4_half_sar(self):
        y, x, w, scale, beta = random_instance(4)
        sar = sar_sigma2(y, x, beta, 0.3, w, scale)
        tsar = tsar_sigma2(y, x, beta, 0.3, 4.0, w, scale)
        assert tsar == pytest.approx(0.5 * sar, rel=1e-14)

    def test_large_nu_limit(self):
        y, x, w, scale, beta = random_instance(5)
        sar = sar_sigma2(y, x, beta, -0.2, w, scale)
        tsar = tsar_sigma2(y, x, beta, -0.2, 1e8, w, scale)
        assert tsar == pytest.approx(sar, rel=1e-6)

    def test_residual_form_identity(self):
        # (nu-2)/nu * (1/n) sum resid_i^2 / d_i at the fitted residuals
        y, x, w, scale, _ = random_instance(6, n=3)
        fit = fit_sar(y, x, w, scale)
        nu = 7.0
        direct = tsar_sigma2(y, x, fit.beta, fit.lam, nu, w, scale)
        via_resid = (nu - 2) / nu * np.mean(fit.residuals**2 / scale.diag)
        assert direct == pytest.approx(via_resid, abs=1e-10)

    def test_requires_nu_above_two(self):
        y, x, w, scale, beta = random_instance(7)
        with pytest.raises(DomainError):
            tsar_sigma2(y, x, beta, 0.0, 2.0, w, scale)


class TestFitTsar:
    def test_fixed_nu_respected(self):
        y, x, w, scale, _ = random_instance(8, n=40)
        fit = fit_tsar(y, x, w, scale, nu=6.0)
        assert fit.nu == 6.0
        assert not fit.nu_estimated

    def test_grid_search_certificate(self):
        # an 18 x 201 (nu, lambda) lattice may undercut the nested optimum by
        # at most the outer tolerance plus grid coarseness
        y, x, w, scale, _ = random_instance(9, n=40, lam=0.6, nu=4.0)
        fit = fit_tsar(y, x, w, scale)
        work = ProfileWork(y, x, w, scale)
        best = -fit.loglik
        grid_best = min(
            _tsar_profile_value(work, lam, nu)
            for nu in np.linspace(3.0, 20.0, 18)
            for lam in np.linspace(-LAMBDA_BOUND, LAMBDA_BOUND, 201)
        )
        assert best <= grid_best + 0.51

    def test_estimated_nu_in_range(self):
        y, x, w, scale, _ = random_instance(10, n=60, nu=4.0, lam=0.5)
        fit = fit_tsar(y, x, w, scale)
        assert fit.nu_estimated
        assert 3.0 <= fit.nu <= 20.0

    def test_residual_identity(self):
        y, x, w, scale, _ = random_instance(11, n=30)
        fit = fit_tsar(y, x, w, scale, nu=5.0)
        a = np.eye(30) - fit.lam * w.to_dense()
        expect = a @ (y - x @ fit.beta)
        assert np.abs(fit.residuals - expect).max() < 1e-10

    def test_loglik_consistent_with_nll(self):
        y, x, w, scale, _ = random_instance(12, n=25)
        fit = fit_tsar(y, x, w, scale, nu=4.5)
        direct = tsar_nll(y, x, fit.beta, fit.lam, fit.sigma, fit.nu, w, scale)
        assert fit.loglik == pytest.approx(-direct, rel=1e-12)

    def test_error_scale_multiplier_invariance(self):
        y, x, w, scale, _ = random_instance(13, n=40, lam=0.5)
        c = 5.0
        fit1 = fit_tsar(y, x, w, scale, nu=4.0)
        fit2 = fit_tsar(y, x, w, ErrorScale(diag=c * scale.diag), nu=4.0)
        assert fit2.lam == pytest.approx(fit1.lam, abs=1e-5)
        assert fit2.beta == pytest.approx(fit1.beta, abs=1e-8)
        assert fit2.sigma**2 == pytest.approx(fit1.sigma**2 / c, rel=1e-4)

    def test_gaussian_limit_matches_sar(self):
        # matched parameterization: SAR sigma^2 = nu/(nu-2) * tSAR sigma^2
        for seed in range(5):
            y, x, w, scale, beta = random_instance(seed + 40, n=8)
            rng = np.random.default_rng(seed)
            lam = rng.uniform(-0.8, 0.8)
            nu = 1e6
            sigma_t = rng.uniform(0.5, 1.5)
            sigma_g = math.sqrt(nu / (nu - 2.0)) * sigma_t
            a = tsar_nll(y, x, beta, lam, sigma_t, nu, w, scale)
            b = sar_nll(y, x, beta, sigma_g, lam, w, scale)
            assert abs(a - b) / y.size <= 1e-3


class TestSHat:
    def test_moment_factor(self):
        y, x, w, scale, _ = random_instance(14, n=30)
        fit = fit_tsar(y, x, w, scale, nu=4.0)
        assert fit.s_hat == pytest.approx(math.sqrt(2.0) * fit.sigma, rel=1e-12)

    def test_sar_passthrough(self):
        y, x, w, scale, _ = random_instance(15, n=30)
        fit = fit_sar(y, x, w, scale)
        assert s_hat(fit) == fit.sigma

    def test_explicit_value(self):
        y, x, w, scale, _ = random_instance(16, n=30)
        fit = fit_tsar(y, x, w, scale, nu=4.0)
        fit.sigma = 1.0
        assert fit.s_hat == pytest.approx(1.41421356, abs=1e-6)


class TestTsarBetaInference:
    def test_large_nu_matches_sar_se(self):
        y, x, w, scale, _ = random_instance(17, n=30)
        sar_fit = fit_sar(y, x, w, scale)
        tsar_fit = fit_tsar(y, x, w, scale, nu=1e6 + 2)
        tsar_fit.beta = sar_fit.beta
        tsar_fit.lam = sar_fit.lam
        tsar_fit.sigma = sar_fit.sigma
        se_t, _, _ = tsar_beta_inference(tsar_fit, x, w, scale)
        se_g = sar_fit.se_beta
        assert np.allclose(se_t, se_g, rtol=1e-6)

    def test_nu4_sqrt2_times_sar(self):
        y, x, w, scale, _ = random_instance(18, n=30)
        fit = fit_tsar(y, x, w, scale, nu=4.0)
        se, _, _ = tsar_beta_inference(fit, x, w, scale)
        # rebuild the lambda-matched Gaussian from the same sigma
        from heavysar.sar import beta_covariance_unscaled

        cov = beta_covariance_unscaled(x, fit.lam, w, scale)
        sar_se = fit.sigma * np.sqrt(np.diag(cov))
        assert np.allclose(se, math.sqrt(2.0) * sar_se, rtol=1e-12)

    def test_dense_oracle(self):
        y, x, w, scale, _ = random_instance(19, n=4)
        fit = fit_tsar(y, x, w, scale, nu=5.0)
        a_inv = np.linalg.inv(np.eye(4) - fit.lam * w.to_dense())
        sigma_y = a_inv @ np.diag(scale.diag) @ a_inv.T
        cov = np.linalg.inv(x.T @ np.linalg.inv(sigma_y) @ x)
        expect = np.sqrt(5.0 / 3.0 * fit.sigma**2 * np.diag(cov))
        assert fit.se_beta == pytest.approx(expect, abs=1e-9)
