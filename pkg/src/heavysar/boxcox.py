"""Power-transform model selection for SAR models.

A Box-Cox transform of the response is combined with backward covariate
elimination: each iteration fits one SAR model per candidate power, keeps the
BIC-minimal power (Jacobian-adjusted, so different powers are comparable
against the same observed response), and drops the least significant
covariate until everything remaining is significant. A companion refit swaps
the Gaussian error for a Student-t error on the final covariate set and
transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonPositiveShiftedResponseError
from .geo import ProximityMatrix
from .sar import SarFit, fit_sar
from .tsar import TsarFit, fit_tsar
from .variance import local_regression_variance_matrix

DEFAULT_L_GRID = (-2.0, -1.0, -0.5, -1.0 / 3.0, 0.0, 1.0 / 3.0, 0.5, 1.0, 2.0)

_L_ZERO_EPS = 1e-12


@dataclass(frozen=True)
class BoxCoxSpec:
    """Shift m and power l of the transform ((y+m)^l - 1) / l."""

    m: float
    l: float


def boxcox(y, m: float, l: float) -> np.ndarray:
    """Box-Cox transform of y with shift m and power l (log when l = 0)."""
    y = np.asarray(y, dtype=float)
    shifted = y + m
    if shifted.min() <= 0:
        raise NonPositiveShiftedResponseError(
            f"min(y) + m = {shifted.min()} must be positive"
        )
    if abs(l) < _L_ZERO_EPS:
        return np.log(shifted)
    return (shifted ** l - 1.0) / l


def inverse_boxcox(v, m: float, l: float) -> np.ndarray:
    """Inverse of the Box-Cox transform; strictly increasing in v."""
    v = np.asarray(v, dtype=float)
    if abs(l) < _L_ZERO_EPS:
        return np.exp(v) - m
    base = l * v + 1.0
    if np.min(base) <= 0:
        raise DomainError("l*v + 1 must be positive to invert the transform")
    return base ** (1.0 / l) - m


def adjusted_loglik(y, m: float, l: float, transformed_model_loglik: float) -> float:
    """Total log-likelihood on the original scale: Jacobian term plus the
    log-likelihood of the model fitted to the transformed response."""
    y = np.asarray(y, dtype=float)
    shifted = y + m
    if shifted.min() <= 0:
        raise NonPositiveShiftedResponseError(
            f"min(y) + m = {shifted.min()} must be positive"
        )
    return float((l - 1.0) * np.log(shifted).sum()) + transformed_model_loglik


def bic(loglik: float, n_params: int, n: int) -> float:
    """Bayesian information criterion, lower is better."""
    if n < 1:
        raise DomainError("n must be at least 1")
    return -2.0 * loglik + n_params * math.log(n)


@dataclass(frozen=True)
class StepwiseTraceRow:
    """One iteration of the stepwise procedure."""

    l: float
    bic: float
    max_p: float
    dropped: str | None
    covariates: tuple[str, ...]


@dataclass
class SelectedModel:
    """Outcome of the stepwise selection (or its t-error companion refit)."""

    spec: BoxCoxSpec
    covariates: tuple[str, ...]
    fit: SarFit | TsarFit
    bic: float
    trace: tuple[StepwiseTraceRow, ...]
    family: str
    response: np.ndarray = field(repr=False)
    covariate_values: dict = field(repr=False)

    def to_dict(self) -> dict:
        from .dataio import fit_to_dict

        return {
            "family": self.family,
            "m": self.spec.m,
            "l": self.spec.l,
            "covariates": list(self.covariates),
            "bic": self.bic,
            "fit": fit_to_dict(self.fit),
            "trace": [
                {
                    "l": row.l,
                    "bic": row.bic,
                    "max_p": row.max_p,
                    "dropped": row.dropped,
                    "covariates": list(row.covariates),
                }
                for row in self.trace
            ],
        }


def _design(names: tuple[str, ...], pool: dict, n: int) -> np.ndarray:
    cols = [np.ones(n)]
    cols.extend(np.asarray(pool[name], dtype=float) for name in names)
    return np.column_stack(cols)


def _best_power_fit(response, names, pool, w, m, l_grid):
    """Fit one SAR per candidate power; return the BIC-minimal one.

    Ties are broken by grid order (first occurrence wins).
    """
    n = response.size
    x = _design(names, pool, n)
    best = None
    for l in l_grid:
        yt = boxcox(response, m, l)
        sigma_eps = local_regression_variance_matrix(x, yt, w)
        fit = fit_sar(yt, x, w, sigma_eps)
        total_ll = adjusted_loglik(response, m, l, fit.loglik)
        b = bic(total_ll, fit.n_sampling_params, n)
        if best is None or b < best[0]:
            best = (b, l, fit)
    return best


def stepwise_select(
    response,
    covariates: dict,
    w: ProximityMatrix,
    m: float = 10.0,
    l_grid=DEFAULT_L_GRID,
    alpha: float = 0.05,
) -> SelectedModel:
    """Backward stepwise SAR selection over a power grid.

    Every iteration refits the error scale as the local regression variance
    matrix of the transformed response, picks the power by BIC, then drops
    the covariate with the largest p-value if that exceeds alpha. The
    intercept is never a candidate for elimination. Stops when all retained
    covariates are significant or none remain.
    """
    response = np.asarray(response, dtype=float).ravel()
    if not l_grid:
        raise DomainError("the power grid must not be empty")
    pool = {name: np.asarray(col, dtype=float).ravel() for name, col in covariates.items()}
    for name, col in pool.items():
        if col.size != response.size:
            raise DomainError(f"covariate {name!r} length differs from response")
    names = tuple(pool.keys())
    trace: list[StepwiseTraceRow] = []
    while True:
        b, l, fit = _best_power_fit(response, names, pool, w, m, l_grid)
        if names:
            p_cov = fit.p_values[1:]  # intercept excluded from the scan
            worst = int(np.argmax(p_cov))
            max_p = float(p_cov[worst])
        else:
            max_p = 0.0
        if names and max_p > alpha:
            dropped = names[worst]
            trace.append(StepwiseTraceRow(l=l, bic=b, max_p=max_p, dropped=dropped,
                                          covariates=names))
            names = tuple(nm for nm in names if nm != dropped)
            continue
        trace.append(StepwiseTraceRow(l=l, bic=b, max_p=max_p, dropped=None,
                                      covariates=names))
        return SelectedModel(
            spec=BoxCoxSpec(m=m, l=l),
            covariates=names,
            fit=fit,
            bic=b,
            trace=tuple(trace),
            family="sar",
            response=response,
            covariate_values={nm: pool[nm] for nm in names},
        )


def tsar_companion(selected: SelectedModel, w: ProximityMatrix) -> SelectedModel:
    """Refit the selected model with t errors and estimated degrees of freedom.

    Covariates, shift and power are taken verbatim from the input; the error
    scale is rebuilt with the same local-regression recipe, and the reported
    BIC is Jacobian-adjusted so it is comparable to the Gaussian one.
    """
    response = selected.response
    m, l = selected.spec.m, selected.spec.l
    x = _design(selected.covariates, selected.covariate_values, response.size)
    yt = boxcox(response, m, l)
    sigma_eps = local_regression_variance_matrix(x, yt, w)
    fit = fit_tsar(yt, x, w, sigma_eps, nu=None)
    total_ll = adjusted_loglik(response, m, l, fit.loglik)
    b = bic(total_ll, fit.n_sampling_params, response.size)
    return SelectedModel(
        spec=selected.spec,
        covariates=selected.covariates,
        fit=fit,
        bic=b,
        trace=selected.trace,
        family="tsar",
        response=response,
        covariate_values=dict(selected.covariate_values),
    )
