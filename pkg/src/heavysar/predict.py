"""Out-of-sample prediction, confidence intervals and coverage evaluation.

A site outside the fitting sample is related to the in-sample responses
through standardized inverse-distance weights over its in-sample neighbors,
mirroring the row-standardized proximity matrix. Interval calibration is
checked by k-fold cross validation together with a binomial likelihood-ratio
test on the count of points falling outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import normal_quantile, t_quantile
from .errors import (
    DegenerateVarianceError,
    DimensionMismatchError,
    DomainError,
    DuplicateLocationError,
    IsolatedSiteError,
    NeighborhoodTooSmallError,
)
from .geo import (
    GeoPoint,
    distances_to_points,
    knn_proximity,
    radius_proximity,
    scheme_spec,
)
from .sar import ProfileWork, fit_sar_from_work
from .tsar import fit_tsar_from_work
from .variance import ErrorScale, local_regression_variance_matrix, ols_fit


@dataclass(frozen=True)
class OosSite:
    """An unsampled location with covariates and neighborhood weights."""

    location: GeoPoint
    x_o: np.ndarray
    neighbor_indices: np.ndarray
    neighbor_weights: np.ndarray
    sigma_o: float

    def __post_init__(self):
        object.__setattr__(self, "x_o", np.asarray(self.x_o, dtype=float).ravel())
        object.__setattr__(
            self, "neighbor_indices", np.asarray(self.neighbor_indices, dtype=int)
        )
        object.__setattr__(
            self, "neighbor_weights", np.asarray(self.neighbor_weights, dtype=float)
        )
        if self.neighbor_indices.size != self.neighbor_weights.size:
            raise DimensionMismatchError("weight and index arrays differ in length")
        if self.neighbor_indices.size == 0:
            raise IsolatedSiteError("site has no in-sample neighbors")
        if abs(self.neighbor_weights.sum() - 1.0) > 1e-10:
            raise DomainError("out-of-sample weights must sum to 1")
        if not self.sigma_o > 0:
            raise DomainError("sigma_o must be positive")


@dataclass(frozen=True)
class IntervalPrediction:
    """Point prediction with a symmetric confidence interval."""

    point: float
    lo: float
    hi: float
    alpha: float
    family: str
    scale: str = "transformed"

    def __post_init__(self):
        if not self.lo <= self.point <= self.hi:
            raise DomainError("interval must contain its center")


def oos_weights(
    loc: GeoPoint | tuple[float, float],
    insample_points,
    scheme: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Standardized inverse-distance weights of a site over in-sample points.

    ``scheme`` matches the fitted proximity matrix: "knn:K" picks the K
    nearest in-sample locations, "radius:R" every location within R km.
    Returns (indices, weights) with weights summing to 1.
    """
    lat, lon = (loc.lat, loc.lon) if isinstance(loc, GeoPoint) else (loc[0], loc[1])
    dist = distances_to_points(lat, lon, insample_points)
    kind, param = scheme_spec(scheme)
    if kind == "knn":
        k = int(param)
        if not 1 <= k <= dist.size:
            raise DomainError(f"k={k} outside 1..{dist.size}")
        order = np.lexsort((np.arange(dist.size), dist))
        idx = order[:k]
    elif kind == "radius":
        idx = np.flatnonzero(dist <= param)
        if idx.size == 0:
            raise IsolatedSiteError(f"no in-sample location within {param} km")
    else:
        raise DomainError("oos weights need a knn or radius scheme")
    d = dist[idx]
    if (d == 0).any():
        raise DuplicateLocationError("site coincides with an in-sample location")
    raw = 1.0 / d
    return idx, raw / raw.sum()


def oos_sigma2(linreg_residuals, neighbor_indices) -> float:
    """Empirical variance of the regression residuals over the neighborhood."""
    r = np.asarray(linreg_residuals, dtype=float).ravel()
    idx = np.asarray(neighbor_indices, dtype=int)
    if idx.size < 2:
        raise NeighborhoodTooSmallError(int(idx[0]) if idx.size else -1,
                                        "out-of-sample neighborhood needs 2+ members")
    v = float(np.var(r[idx], ddof=1))
    if v <= 0:
        raise DegenerateVarianceError(-1, "residuals constant over the neighborhood")
    return v


def oos_predict(fit, site: OosSite, y, x) -> float:
    """Local prediction b'x_o + lambda * sum_j w_oj (y_j - b'x_j)."""
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    if x.shape[0] != y.size:
        raise DimensionMismatchError("design matrix rows must match response length")
    if site.x_o.size != fit.beta.size or x.shape[1] != fit.beta.size:
        raise DimensionMismatchError("covariate row length must match coefficients")
    idx = site.neighbor_indices
    dev = y[idx] - x[idx] @ fit.beta
    return float(fit.beta @ site.x_o + fit.lam * (site.neighbor_weights @ dev))


def confidence_interval(point: float, sigma_o: float, fit, alpha: float,
                        scale: str = "transformed") -> IntervalPrediction:
    """Symmetric (1-alpha) interval around the point prediction.

    The half width is the 1-alpha/2 quantile of the fitted error family at
    scale sqrt(sigma^2 * sigma_o): normal for SAR, Student-t with the fitted
    degrees of freedom for tSAR.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if not sigma_o > 0:
        raise DomainError("sigma_o must be positive")
    if fit.model == "sar":
        q = normal_quantile(1.0 - alpha / 2.0)
    elif fit.model == "tsar":
        q = t_quantile(1.0 - alpha / 2.0, fit.nu)
    else:
        raise DomainError(f"unknown model family {fit.model!r}")
    half = q * math.sqrt(fit.sigma * fit.sigma * sigma_o)
    return IntervalPrediction(
        point=point, lo=point - half, hi=point + half,
        alpha=alpha, family=fit.model, scale=scale,
    )


def kfold_partition(n: int, folds: int = 10, seed: int = 0) -> np.ndarray:
    """Random fold labels 0..folds-1, sizes differing by at most one.

    The assignment is a seeded permutation (counter-based Philox stream), so
    it is reproducible for a given seed.
    """
    if folds < 2:
        raise DomainError("need at least 2 folds")
    if n < folds:
        raise DomainError("need at least one point per fold")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    perm = rng.permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % folds
    return labels


def coverage(y_true, intervals: Sequence[IntervalPrediction]) -> float:
    """Proportion of true values inside their intervals."""
    y = np.asarray(y_true, dtype=float).ravel()
    if y.size != len(intervals):
        raise DimensionMismatchError("one interval per observation required")
    inside = sum(1 for yi, iv in zip(y, intervals) if iv.lo <= yi <= iv.hi)
    return inside / y.size


def binomial_lrt(k_outside: int, n: int, alpha: float) -> tuple[float, float]:
    """Likelihood-ratio test of 'outside count is Binomial(n, alpha)'.

    Returns (statistic, p value); the statistic is compared against the
    chi-square distribution with one degree of freedom, whose survival
    function is evaluated through the normal CDF.
    """
    if not 0 <= k_outside <= n:
        raise DomainError("k must lie in 0..n")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    p_hat = k_outside / n
    stat = 0.0
    if k_outside > 0:
        stat += k_outside * math.log(p_hat / alpha)
    if k_outside < n:
        stat += (n - k_outside) * math.log((1.0 - p_hat) / (1.0 - alpha))
    stat *= 2.0
    stat = max(stat, 0.0)
    # 2 (1 - normal_cdf(sqrt(stat))), written via erfc to survive the far tail
    p_value = math.erfc(math.sqrt(stat) / math.sqrt(2.0))
    return stat, p_value


@dataclass(frozen=True)
class CoverageRow:
    family: str
    alpha: float
    coverage: float
    n: int
    outside: int
    lrt_statistic: float
    p_value: float


@dataclass
class CoverageReport:
    rows: list[CoverageRow] = field(default_factory=list)

    def row(self, family: str, alpha: float) -> CoverageRow:
        for r in self.rows:
            if r.family == family and abs(r.alpha - alpha) < 1e-12:
                return r
        raise KeyError((family, alpha))


def crossval_coverage(
    points,
    x,
    y,
    scheme: str = "knn:30",
    families: Sequence[str] = ("sar", "tsar"),
    sigma_source: str = "local-regression",
    folds: int = 10,
    seed: int = 0,
    alphas: Sequence[float] = (0.1, 0.05, 0.01),
    nu: float | None = None,
) -> CoverageReport:
    """k-fold out-of-sample interval coverage with the binomial LRT.

    Every fold is held out once; the remaining locations form the fitting
    sample with their own proximity matrix and error scale. ``sigma_source``
    is "local-regression" (error scale and sigma_o from OLS residuals) or
    "identity" (unit scales). ``nu=None`` estimates the degrees of freedom
    per fold for tSAR fits.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    pts = np.asarray(points, dtype=float)
    n = y.size
    if pts.shape[0] != n or x.shape[0] != n:
        raise DimensionMismatchError("points, x and y must agree in length")
    kind, param = scheme_spec(scheme)
    labels = kfold_partition(n, folds=folds, seed=seed)
    intervals: dict[tuple[str, float], list[IntervalPrediction]] = {
        (fam, a): [] for fam in families for a in alphas
    }
    y_eval: list[float] = []
    for fold in range(folds):
        test = np.flatnonzero(labels == fold)
        train = np.flatnonzero(labels != fold)
        pts_tr, x_tr, y_tr = pts[train], x[train], y[train]
        if kind == "knn":
            w_tr = knn_proximity(pts_tr, int(param))
        else:
            w_tr = radius_proximity(pts_tr, float(param))
        if sigma_source == "local-regression":
            sigma_eps = local_regression_variance_matrix(x_tr, y_tr, w_tr)
            resid_lm = ols_fit(x_tr, y_tr).residuals
        elif sigma_source == "identity":
            sigma_eps = ErrorScale.identity(train.size)
            resid_lm = None
        else:
            raise DomainError(f"unknown sigma source {sigma_source!r}")
        # one ProfileWork per fold: both families reuse its per-lambda parts
        work = ProfileWork(y_tr, x_tr, w_tr, sigma_eps)
        fits = {}
        for fam in families:
            if fam == "sar":
                fits[fam] = fit_sar_from_work(work)
            elif fam == "tsar":
                fits[fam] = fit_tsar_from_work(work, nu=nu)
            else:
                raise DomainError(f"unknown family {fam!r}")
        for i in test:
            idx, wts = oos_weights((pts[i, 0], pts[i, 1]), pts_tr, scheme)
            sigma_o = (
                oos_sigma2(resid_lm, idx) if resid_lm is not None else 1.0
            )
            y_eval.append(y[i])
            for fam in families:
                point = oos_predict(
                    fits[fam],
                    OosSite(
                        location=GeoPoint(float(pts[i, 0]), float(pts[i, 1])),
                        x_o=x[i],
                        neighbor_indices=idx,
                        neighbor_weights=wts,
                        sigma_o=sigma_o,
                    ),
                    y_tr,
                    x_tr,
                )
                for a in alphas:
                    intervals[(fam, a)].append(
                        confidence_interval(point, sigma_o, fits[fam], a)
                    )
    report = CoverageReport()
    y_arr = np.asarray(y_eval)
    for fam in families:
        for a in alphas:
            ivs = intervals[(fam, a)]
            outside = sum(
                1 for yi, iv in zip(y_arr, ivs) if not iv.lo <= yi <= iv.hi
            )
            cov = 1.0 - outside / len(ivs)
            stat, p = binomial_lrt(outside, len(ivs), a)
            report.rows.append(
                CoverageRow(family=fam, alpha=a, coverage=cov, n=len(ivs),
                            outside=outside, lrt_statistic=stat, p_value=p)
            )
    return report
