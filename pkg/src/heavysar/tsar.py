"""Student-t simultaneous autoregressive (tSAR) model.

Same autoregressive structure as the Gaussian SAR model, but the error
components are independent univariate t variates, which accommodates heavy
tails. The coefficients keep their generalized least squares form, the scale
uses a (nu-2)/nu moment correction so that sigma^2 estimates the t scale
parameter rather than the variance, and the spatial dependence parameter is
profiled out numerically. When the degrees of freedom are unknown they are
estimated by an outer one-dimensional search over [3, 20] with absolute
tolerance 1 wrapped around the inner lambda profile search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .distributions import t_cdf, t_density, t_quantile  # noqa: F401 (re-exported)
from .errors import (
    DomainError,
    NonPositiveSigmaError,
    OptimizerFailureError,
)
from .geo import ProximityMatrix
from .sar import (
    LAMBDA_BOUND,
    LAMBDA_TOL,
    ProfileWork,
    _as_inputs,
    _check_lambda,
    _wald_inference,
    _BOUNDARY_MARGIN,
    beta_covariance_unscaled,
    local_predictions,
    sigma_y_inv_form,
)
from .variance import ErrorScale

__all__ = [
    "NU_RANGE", "NU_TOL", "TsarFit", "fit_tsar", "s_hat", "t_cdf", "t_density",
    "t_quantile", "tsar_beta_gradient", "tsar_beta_inference", "tsar_nll",
    "tsar_sigma2",
]

NU_RANGE = (3.0, 20.0)
NU_TOL = 1.0


def _whitened(y, x, beta, lam, w, sigma_eps):
    """m = Sigma_eps^{-1/2} (I - lam W)(y - X beta) and the matching rows of
    Sigma_eps^{-1/2} (I - lam W) X."""
    resid = y - x @ np.asarray(beta, dtype=float)
    sqrt_d = np.sqrt(sigma_eps.diag)
    m = (resid - lam * w.matvec(resid)) / sqrt_d
    rows = (x - lam * (w.to_dense() @ x)) / sqrt_d[:, None]
    return m, rows


def _t_loglik_sum(z: np.ndarray, sigma2: float, nu: float) -> float:
    """Sum of log t(z_i | 0, sigma2, nu) over the vector z."""
    n = z.size
    const = (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * math.log(nu * math.pi * sigma2)
    )
    return float(n * const - (nu + 1.0) / 2.0 * np.log1p(z * z / (nu * sigma2)).sum())


def tsar_nll(y, x, beta, lam: float, sigma: float, nu: float,
             w: ProximityMatrix, sigma_eps: ErrorScale) -> float:
    """Negative log-likelihood of the tSAR model at the given parameters."""
    y, x, w, sigma_eps = _as_inputs(y, x, w, sigma_eps)
    lam = _check_lambda(lam)
    if not sigma > 0:
        raise NonPositiveSigmaError(f"sigma must be positive, got {sigma}")
    if not nu > 0:
        raise DomainError("degrees of freedom must be positive")
    resid = y - x @ np.asarray(beta, dtype=float)
    z = (resid - lam * w.matvec(resid)) / np.sqrt(sigma_eps.diag)
    sign, logabs = np.linalg.slogdet(np.eye(w.n) - lam * w.to_dense())
    if sign == 0:
        return math.inf
    half_logdet_eps = 0.5 * float(np.log(sigma_eps.diag).sum())
    return half_logdet_eps - float(logabs) - _t_loglik_sum(z, sigma * sigma, nu)


def tsar_beta_gradient(y, x, beta, lam: float, sigma: float, nu: float,
                       w: ProximityMatrix, sigma_eps: ErrorScale) -> np.ndarray:
    """Gradient of tsar_nll with respect to beta.

    The determinant term is beta-free, so only the density sum contributes:
    d/dbeta = -(nu+1) * sum_i m_i / (sigma^2 nu + m_i^2) * row_i, with m and
    the rows of the whitened design as in the likelihood.
    """
    y, x, w, sigma_eps = _as_inputs(y, x, w, sigma_eps)
    lam = _check_lambda(lam)
    if not sigma > 0:
        raise NonPositiveSigmaError(f"sigma must be positive, got {sigma}")
    if not nu > 0:
        raise DomainError("degrees of freedom must be positive")
    m, rows = _whitened(y, x, beta, lam, w, sigma_eps)
    weights = m / (sigma * sigma * nu + m * m)
    return -(nu + 1.0) * (rows.T @ weights)


def tsar_sigma2(y, x, beta, lam: float, nu: float,
                w: ProximityMatrix, sigma_eps: ErrorScale) -> float:
    """Moment-corrected scale estimate ((nu-2)/nu) (1/n) (y-Xb)' Sigma_Y^-1 (y-Xb)."""
    if not nu > 2:
        raise DomainError("degrees of freedom must exceed 2")
    y, x, w, sigma_eps = _as_inputs(y, x, w, sigma_eps)
    resid = y - x @ np.asarray(beta, dtype=float)
    return (nu - 2.0) / nu * sigma_y_inv_form(resid, lam, w, sigma_eps) / y.size


def _tsar_profile_value(work: ProfileWork, lam: float, nu: float) -> float:
    """Profile nll at (lambda, nu) with beta by GLS and sigma moment-corrected."""
    _, z, rss, logdet_a = work.parts(lam)
    sigma2 = (nu - 2.0) / nu * rss / work.n
    if not (sigma2 > 0 and np.isfinite(sigma2) and np.isfinite(logdet_a)):
        return math.inf
    return 0.5 * work.logdet_eps - logdet_a - _t_loglik_sum(z, sigma2, nu)


@dataclass
class TsarFit:
    """Fitted Student-t SAR model."""

    beta: np.ndarray
    lam: float
    sigma: float
    nu: float
    nu_estimated: bool
    loglik: float
    se_beta: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    fitted: np.ndarray | None = None
    residuals: np.ndarray | None = None
    std_residuals: np.ndarray | None = None
    sigma_eps: ErrorScale | None = None
    w: ProximityMatrix | None = None
    warnings: list[str] = field(default_factory=list)

    model = "tsar"

    @property
    def s_hat(self) -> float:
        """Standard deviation of the standardized error, sqrt(nu/(nu-2)) sigma."""
        return math.sqrt(self.nu / (self.nu - 2.0)) * self.sigma

    @property
    def n_sampling_params(self) -> int:
        """Parameters counted by BIC: coefficients, sigma, lambda, and nu if estimated."""
        return self.beta.size + 2 + (1 if self.nu_estimated else 0)


def s_hat(fit) -> float:
    """Estimated standard deviation of the standardized error for any fit."""
    return fit.s_hat


def _inner_lambda_search(work: ProfileWork, nu: float):
    seen_finite = []

    def objective(t):
        v = _tsar_profile_value(work, t, nu)
        if np.isfinite(v):
            seen_finite.append(True)
            return v
        return 1e300

    res = minimize_scalar(
        objective, bounds=(-LAMBDA_BOUND, LAMBDA_BOUND), method="bounded",
        options={"xatol": LAMBDA_TOL, "maxiter": 200},
    )
    if not seen_finite:
        raise OptimizerFailureError("no interior evaluation of the profile succeeded")
    lam = float(res.x)
    return lam, _tsar_profile_value(work, lam, nu)


def fit_tsar(y, x, w: ProximityMatrix, sigma_eps: ErrorScale | None = None,
             nu: float | None = None) -> TsarFit:
    """Fit a tSAR model by nested profile optimization.

    With ``nu`` given, only the inner lambda search runs. With ``nu=None``
    the degrees of freedom are estimated: an outer bounded search over
    NU_RANGE with absolute tolerance NU_TOL (coarse on purpose, the profile
    is flat in nu) wraps the inner lambda search.
    """
    return fit_tsar_from_work(ProfileWork(y, x, w, sigma_eps), nu=nu)


def fit_tsar_from_work(work: ProfileWork, nu: float | None = None) -> TsarFit:
    """fit_tsar on a prepared ProfileWork (lets fits share cached parts)."""
    w = work.w
    if nu is not None:
        if not nu > 2:
            raise DomainError("degrees of freedom must exceed 2")
        nu_hat = float(nu)
        lam_hat, nll = _inner_lambda_search(work, nu_hat)
        estimated = False
    else:
        by_nu: dict[float, tuple[float, float]] = {}

        def outer(t):
            lam_t, val = _inner_lambda_search(work, t)
            by_nu[float(t)] = (lam_t, val)
            return val if np.isfinite(val) else 1e300

        res = minimize_scalar(
            outer, bounds=NU_RANGE, method="bounded",
            options={"xatol": NU_TOL, "maxiter": 100},
        )
        nu_hat = float(res.x)
        if nu_hat not in by_nu:
            by_nu[nu_hat] = _inner_lambda_search(work, nu_hat)
        lam_hat, nll = by_nu[nu_hat]
        estimated = True
    if not np.isfinite(nll):
        raise OptimizerFailureError("profile likelihood is not finite at the optimum")
    beta, _, rss, _ = work.parts(lam_hat)
    sigma2 = (nu_hat - 2.0) / nu_hat * rss / work.n
    sigma = math.sqrt(sigma2)
    warnings = []
    if LAMBDA_BOUND - abs(lam_hat) <= _BOUNDARY_MARGIN:
        warnings.append("lambda estimate at the search boundary")
    cov = beta_covariance_unscaled(work.x, lam_hat, w, work.sigma_eps)
    se = np.sqrt(np.maximum(nu_hat / (nu_hat - 2.0) * sigma2 * np.diag(cov), 0.0))
    z, p = _wald_inference(beta, se)
    fitted = local_predictions(beta, lam_hat, work.y, work.x, w)
    residuals = work.y - fitted
    std_res = residuals / np.sqrt(sigma2 * work.sigma_eps.diag)
    return TsarFit(
        beta=beta, lam=lam_hat, sigma=sigma, nu=nu_hat, nu_estimated=estimated,
        loglik=-nll, se_beta=se, z_scores=z, p_values=p,
        fitted=fitted, residuals=residuals, std_residuals=std_res,
        sigma_eps=work.sigma_eps, w=w, warnings=warnings,
    )


def tsar_beta_inference(fit, x, w: ProximityMatrix, sigma_eps: ErrorScale):
    """(standard errors, z scores, p values) for the coefficients of a tSAR fit."""
    if not fit.nu > 2:
        raise DomainError("degrees of freedom must exceed 2")
    cov = beta_covariance_unscaled(x, fit.lam, w, sigma_eps)
    scale2 = fit.nu / (fit.nu - 2.0) * fit.sigma * fit.sigma
    se = np.sqrt(np.maximum(scale2 * np.diag(cov), 0.0))
    z, p = _wald_inference(fit.beta, se)
    return se, z, p
