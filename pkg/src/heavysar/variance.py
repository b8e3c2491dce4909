"""Heteroscedastic error-scale construction from neighborhood-local variances.

The error scale matrix is diagonal; its entries are either all ones
(identity), user supplied, or local empirical variances of ordinary least
squares residuals over each location's neighborhood (the local regression
variance matrix).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVarianceError,
    DimensionMismatchError,
    DomainError,
    NeighborhoodTooSmallError,
    RankDeficientDesignError,
)
from .geo import ProximityMatrix


@dataclass(frozen=True)
class ErrorScale:
    """Positive diagonal of the error scale matrix, with provenance."""

    diag: np.ndarray
    source: str = "user"  # identity | local_regression | user

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        object.__setattr__(self, "diag", d)
        if d.ndim != 1:
            raise DomainError("error scale diagonal must be a vector")
        if d.size == 0 or not np.isfinite(d).all() or (d <= 0).any():
            raise DomainError("error scale entries must be strictly positive and finite")

    @property
    def n(self) -> int:
        return self.diag.size

    @classmethod
    def identity(cls, n: int) -> "ErrorScale":
        return cls(diag=np.ones(n), source="identity")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(list(map(float, self.diag)), fh)

    @classmethod
    def load(cls, path, source: str = "user") -> "ErrorScale":
        with open(path, encoding="utf-8") as fh:
            return cls(diag=np.asarray(json.load(fh), dtype=float), source=source)


@dataclass(frozen=True)
class OlsFit:
    beta_lm: np.ndarray
    residuals: np.ndarray


def ols_fit(x: np.ndarray, y: np.ndarray) -> OlsFit:
    """Least squares fit of y on the columns of x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DimensionMismatchError("design matrix rows must match response length")
    beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise RankDeficientDesignError(
            f"design has rank {rank} < {x.shape[1]} columns"
        )
    return OlsFit(beta_lm=beta, residuals=y - x @ beta)


def local_empirical_variance(z: np.ndarray, w: ProximityMatrix) -> ErrorScale:
    """Sample variance of z over each location's neighborhood.

    Entry i is the variance of {z_j : j in N_i} with denominator |N_i| - 1;
    z_i itself is excluded because i is not its own neighbor.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size != w.n:
        raise DimensionMismatchError("value vector length must match matrix size")
    counts = w.neighbor_counts()
    small = np.flatnonzero(counts < 2)
    if small.size:
        raise NeighborhoodTooSmallError(int(small[0]))
    # two-pass variance over the CSR neighbor lists (stable under shifts)
    starts = w.matrix.indptr[:-1]
    zn = z[w.matrix.indices]
    means = np.add.reduceat(zn, starts) / counts
    dev = zn - np.repeat(means, counts)
    diag = np.add.reduceat(dev * dev, starts) / (counts - 1)
    # roundoff-level spread counts as zero (exact zeros never survive lstsq)
    floor = (1e-12 * max(1.0, float(np.abs(z).max()))) ** 2
    zero = np.flatnonzero(diag <= floor)
    if zero.size:
        raise DegenerateVarianceError(int(zero[0]))
    return ErrorScale(diag=diag, source="local_regression")


def local_regression_variance_matrix(
    x: np.ndarray, y: np.ndarray, w: ProximityMatrix
) -> ErrorScale:
    """Error scale from local variances of OLS residuals of y on x."""
    fit = ols_fit(x, y)
    return local_empirical_variance(fit.residuals, w)
