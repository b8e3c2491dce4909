"""Monte Carlo harness comparing SAR and tSAR estimators.

Data are generated from a tSAR model over locations sampled in a
continental-US bounding box (or supplied coordinates), with region-dependent
error scales taken from a configurable rectangle partition. Six models are
fitted per replication: the Gaussian and the t error family, each combined
with an identity, a local-regression, and the true error scale matrix.

Every replication draws from its own counter-based RNG stream (Philox keyed
by the master seed and the replication index), so results are bit-identical
regardless of how replications are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, DomainError, OptimizerFailureError
from .geo import knn_proximity
from .sar import fit_sar
from .tsar import fit_tsar
from .variance import ErrorScale, local_regression_variance_matrix

DEFAULT_WINDOW = (24.0, 49.0, -125.0, -66.0)  # lat_min, lat_max, lon_min, lon_max
DEFAULT_SCALES = (4.0, 0.6, 5.0, 0.3, 4.0, 6.0)
DEFAULT_BETA = (3.0, 10.0, 4.0, 5.0, 2.0, 8.0, 1.0, 3.0)

# model number -> (family, error scale source)
MODEL_GRID = {
    1: ("sar", "identity"),
    2: ("tsar", "identity"),
    3: ("sar", "local_regression"),
    4: ("tsar", "local_regression"),
    5: ("sar", "true"),
    6: ("tsar", "true"),
}


@dataclass(frozen=True)
class RegionPartition:
    """Disjoint lat/lon rectangles covering a window, with one scale each."""

    rects: tuple[tuple[float, float, float, float], ...]  # lat_lo, lat_hi, lon_lo, lon_hi
    scales: tuple[float, ...]

    def __post_init__(self):
        if len(self.rects) != len(self.scales):
            raise DomainError("one scale per rectangle required")
        if any(not s > 0 for s in self.scales):
            raise DomainError("region scales must be positive")

    @classmethod
    def grid(cls, window=DEFAULT_WINDOW, scales=DEFAULT_SCALES,
             n_lat: int = 2, n_lon: int = 3) -> "RegionPartition":
        """Regular n_lat x n_lon split of the window, row-major from the
        south-west corner."""
        lat_min, lat_max, lon_min, lon_max = window
        lat_edges = np.linspace(lat_min, lat_max, n_lat + 1)
        lon_edges = np.linspace(lon_min, lon_max, n_lon + 1)
        rects = []
        for i in range(n_lat):
            for j in range(n_lon):
                rects.append(
                    (lat_edges[i], lat_edges[i + 1], lon_edges[j], lon_edges[j + 1])
                )
        if len(rects) != len(scales):
            raise DomainError(
                f"grid yields {len(rects)} regions but {len(scales)} scales given"
            )
        return cls(rects=tuple(rects), scales=tuple(scales))

    def region_of(self, lat, lon) -> np.ndarray:
        """Region index of every location; errors if a point is not covered
        exactly once. Upper edges belong to the last band so the window
        boundary is covered."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        out = np.full(lat.shape, -1, dtype=int)
        hits = np.zeros(lat.shape, dtype=int)
        lat_top = max(r[1] for r in self.rects)
        lon_top = max(r[3] for r in self.rects)
        for idx, (lat_lo, lat_hi, lon_lo, lon_hi) in enumerate(self.rects):
            lat_upper = (lat <= lat_hi) if lat_hi == lat_top else (lat < lat_hi)
            lon_upper = (lon <= lon_hi) if lon_hi == lon_top else (lon < lon_hi)
            inside = (lat >= lat_lo) & lat_upper & (lon >= lon_lo) & lon_upper
            out[inside] = idx
            hits += inside
        if (hits != 1).any():
            bad = int(np.flatnonzero(hits != 1)[0])
            raise DomainError(
                f"location {bad} covered by {int(hits.ravel()[bad])} regions, expected 1"
            )
        return out

    def scale_of(self, lat, lon) -> np.ndarray:
        return np.asarray(self.scales, dtype=float)[self.region_of(lat, lon)]


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one simulation scenario."""

    n: int = 250
    k: int = 30
    nu: float = 4.0
    lam: float = 0.8
    beta: tuple[float, ...] = DEFAULT_BETA
    window: tuple[float, float, float, float] = DEFAULT_WINDOW
    scales: tuple[float, ...] = DEFAULT_SCALES
    replications: int = 500
    seed: int = 0
    locations: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not self.nu > 2:
            raise DomainError("nu must exceed 2")
        if not abs(self.lam) < 1:
            raise DomainError("|lambda| must be below 1")
        if self.replications < 1:
            raise DomainError("need at least one replication")
        if not 1 <= self.k <= self.n - 1:
            raise DomainError("k must lie in 1..n-1")
        if self.locations is not None and len(self.locations) != self.n:
            raise DomainError("supplied locations must match n")

    @property
    def true_s(self) -> float:
        """Standard deviation of the standardized error, sqrt(nu/(nu-2))."""
        return math.sqrt(self.nu / (self.nu - 2.0))

    def regions(self) -> RegionPartition:
        return RegionPartition.grid(self.window, self.scales)


def simulate_covariates(n: int, rng: np.random.Generator) -> np.ndarray:
    """Design matrix: intercept, five standard normals, Bernoulli(0.3) and
    Bernoulli(0.7) columns."""
    cols = [np.ones(n)]
    cols.append(rng.standard_normal((n, 5)))
    cols.append((rng.random(n) < 0.3).astype(float)[:, None])
    cols.append((rng.random(n) < 0.7).astype(float)[:, None])
    return np.column_stack([c if c.ndim == 2 else c[:, None] for c in cols])


def simulate_t_errors(scales, nu: float, rng: np.random.Generator) -> np.ndarray:
    """Independent t(0, s_i^2, nu) draws as s_i * Z / sqrt(V/nu) with Z
    standard normal and V chi-square(nu)."""
    s = np.asarray(scales, dtype=float)
    z = rng.standard_normal(s.size)
    v = rng.chisquare(nu, s.size)
    return s * z / np.sqrt(v / nu)


def simulate_tsar(config: StudyConfig, regions: RegionPartition,
                  locations: np.ndarray, rng: np.random.Generator):
    """Draw one dataset from the tSAR model.

    The response solves the autoregressive system with a single linear
    solve. Returns (y, X, W, true error scale).
    """
    locations = np.asarray(locations, dtype=float)
    n = locations.shape[0]
    w = knn_proximity(locations, config.k)
    x = simulate_covariates(n, rng)
    s = regions.scale_of(locations[:, 0], locations[:, 1])
    eps = simulate_t_errors(s, config.nu, rng)
    beta = np.asarray(config.beta, dtype=float)
    a = np.eye(n) - config.lam * w.to_dense()
    y = x @ beta + np.linalg.solve(a, eps)
    return y, x, w, ErrorScale(diag=s * s, source="user")


def rmse(true_value, estimates) -> float:
    """Root mean squared error over replications, averaged across components."""
    true = np.atleast_1d(np.asarray(true_value, dtype=float))
    est = np.asarray(estimates, dtype=float)
    if est.ndim == 1:
        est = est[:, None]
    if est.ndim != 2 or est.shape[1] != true.size:
        raise DimensionMismatchError(
            f"estimates shape {est.shape} does not match {true.size} components"
        )
    return float(np.sqrt(np.mean((est - true[None, :]) ** 2)))


@dataclass(frozen=True)
class StudyModelSummary:
    """Aggregated results for one model of the comparison grid."""

    n: int
    model: int
    family: str
    sigma_source: str
    rmse_beta: float
    rmse_lambda: float
    rmse_s: float
    rmse_nu: float | None
    mean_ll: float
    mean_beta: float
    mean_lambda: float
    mean_s: float
    mean_nu: float | None


@dataclass
class StudyResult:
    config: StudyConfig
    replications: int
    seed: int
    rows: list[StudyModelSummary]
    n_failures: int
    failures: list[tuple[int, str]] = field(default_factory=list)

    def row(self, model: int) -> StudyModelSummary:
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)

    CSV_COLUMNS = (
        "n", "model", "rmse_beta", "rmse_lambda", "rmse_s", "rmse_nu",
        "mean_ll", "mean_beta", "mean_lambda", "mean_s", "mean_nu",
    )

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    r.n, r.model, repr(r.rmse_beta), repr(r.rmse_lambda),
                    repr(r.rmse_s),
                    "" if r.rmse_nu is None else repr(r.rmse_nu),
                    repr(r.mean_ll), repr(r.mean_beta), repr(r.mean_lambda),
                    repr(r.mean_s),
                    "" if r.mean_nu is None else repr(r.mean_nu),
                ])


def _replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    )


def _run_replication(config: StudyConfig, seed: int, index: int) -> dict:
    """One replication: simulate, then fit all six models.

    Draw order is fixed (locations, covariates, error numerator, error
    denominator) so the stream layout is part of the reproducibility
    contract.
    """
    rng = _replication_rng(seed, index)
    regions = config.regions()
    if config.locations is not None:
        locations = np.asarray(config.locations, dtype=float)
    else:
        lat_min, lat_max, lon_min, lon_max = config.window
        locations = np.column_stack([
            rng.uniform(lat_min, lat_max, config.n),
            rng.uniform(lon_min, lon_max, config.n),
        ])
    y, x, w, sigma_true = simulate_tsar(config, regions, locations, rng)
    scales = {
        "identity": ErrorScale.identity(config.n),
        "local_regression": local_regression_variance_matrix(x, y, w),
        "true": sigma_true,
    }
    out: dict[int, dict] = {}
    for model, (family, source) in MODEL_GRID.items():
        sigma_eps = scales[source]
        if family == "sar":
            fit = fit_sar(y, x, w, sigma_eps)
            nu_hat = None
        else:
            fit = fit_tsar(y, x, w, sigma_eps, nu=None)
            nu_hat = fit.nu
        out[model] = {
            "beta": fit.beta,
            "lambda": fit.lam,
            "s": fit.s_hat,
            "nu": nu_hat,
            "ll": fit.loglik,
        }
    return out


def run_study(config: StudyConfig, replications: int | None = None,
              seed: int | None = None, n_jobs: int = 1) -> StudyResult:
    """Run the estimator comparison; aggregation order never depends on the
    execution schedule. Replications that raise are excluded and counted;
    more than 5% failures aborts the study."""
    reps = config.replications if replications is None else int(replications)
    master = config.seed if seed is None else int(seed)
    if reps < 1:
        raise DomainError("need at least one replication")
    results: list[dict | None] = [None] * reps
    failures: list[tuple[int, str]] = []
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [
                pool.submit(_run_replication, config, master, i) for i in range(reps)
            ]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # noqa: BLE001 - per-replication isolation
                    failures.append((i, repr(exc)))
    else:
        for i in range(reps):
            try:
                results[i] = _run_replication(config, master, i)
            except Exception as exc:  # noqa: BLE001 - per-replication isolation
                failures.append((i, repr(exc)))
    if len(failures) > 0.05 * reps:
        raise OptimizerFailureError(
            f"{len(failures)} of {reps} replications failed; first: {failures[0]}"
        )
    ok = [r for r in results if r is not None]
    beta_true = np.asarray(config.beta, dtype=float)
    rows = []
    for model, (family, source) in MODEL_GRID.items():
        betas = np.vstack([r[model]["beta"] for r in ok])
        lams = np.asarray([r[model]["lambda"] for r in ok])
        ss = np.asarray([r[model]["s"] for r in ok])
        lls = np.asarray([r[model]["ll"] for r in ok])
        if family == "tsar":
            nus = np.asarray([r[model]["nu"] for r in ok])
            rmse_nu = rmse(config.nu, nus)
            mean_nu = float(nus.mean())
        else:
            rmse_nu = None
            mean_nu = None
        rows.append(StudyModelSummary(
            n=config.n, model=model, family=family, sigma_source=source,
            rmse_beta=rmse(beta_true, betas),
            rmse_lambda=rmse(config.lam, lams),
            rmse_s=rmse(config.true_s, ss),
            rmse_nu=rmse_nu,
            mean_ll=float(lls.mean()),
            mean_beta=float(betas.mean()),
            mean_lambda=float(lams.mean()),
            mean_s=float(ss.mean()),
            mean_nu=mean_nu,
        ))
    return StudyResult(
        config=config, replications=reps, seed=master, rows=rows,
        n_failures=len(failures), failures=failures,
    )
