"""Geographic distances, neighborhoods, and row-standardized proximity matrices.

Locations are longitude/latitude pairs; connection strength between two
locations is the inverse of their great-circle distance. Two construction
schemes are supported: k nearest neighbors (every row ends up with exactly
k entries) and a fixed radius in kilometers (rows are symmetric before
standardization but may have different sizes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import (
    DomainError,
    DuplicateLocationError,
    IsolatedLocationError,
    KOutOfRangeError,
)

# IUGG mean Earth radius.
EARTH_RADIUS_KM = 6371.0088

ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class GeoPoint:
    """A location given as latitude/longitude in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (np.isfinite(self.lat) and np.isfinite(self.lon)):
            raise DomainError("coordinates must be finite")
        if not (-90.0 <= self.lat <= 90.0):
            raise DomainError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise DomainError(f"longitude {self.lon} outside [-180, 180]")


def points_to_arrays(points: Sequence[GeoPoint] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (lat, lon) degree arrays from GeoPoints or an (n, 2) array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DomainError("coordinate array must have shape (n, 2) as (lat, lon)")
        lat, lon = arr[:, 0], arr[:, 1]
    else:
        lat = np.array([p.lat for p in points], dtype=float)
        lon = np.array([p.lon for p in points], dtype=float)
    if lat.size:
        if not (np.isfinite(lat).all() and np.isfinite(lon).all()):
            raise DomainError("coordinates must be finite")
        if np.abs(lat).max() > 90.0 or np.abs(lon).max() > 180.0:
            raise DomainError("coordinates outside valid ranges")
    return lat, lon


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km between two points (haversine formula)."""
    return float(
        _haversine(
            np.radians(a.lat), np.radians(a.lon), np.radians(b.lat), np.radians(b.lon)
        )
    )


def _haversine(lat1, lon1, lat2, lon2):
    """Haversine distance on a sphere of radius EARTH_RADIUS_KM; radians in."""
    s = (
        np.sin((lat2 - lat1) / 2.0) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    )
    return EARTH_RADIUS_KM * 2.0 * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))


def pairwise_distances(points: Sequence[GeoPoint] | np.ndarray) -> np.ndarray:
    """Dense n x n matrix of great-circle distances in km."""
    lat, lon = points_to_arrays(points)
    lat = np.radians(lat)
    lon = np.radians(lon)
    return _haversine(lat[:, None], lon[:, None], lat[None, :], lon[None, :])


def distances_to_points(
    site_lat: float, site_lon: float, points: Sequence[GeoPoint] | np.ndarray
) -> np.ndarray:
    """Great-circle distances in km from one site to each listed point."""
    lat, lon = points_to_arrays(points)
    return _haversine(
        np.radians(site_lat), np.radians(site_lon), np.radians(lat), np.radians(lon)
    )


@dataclass(frozen=True)
class ProximityMatrix:
    """Sparse nonnegative spatial weight matrix with zero diagonal.

    ``scheme`` records how the matrix was built: ``"knn:K"``, ``"radius:R"``
    (R in km) or ``"custom"``. The underlying storage is CSR; every stored
    weight is strictly positive, so the sparsity pattern defines the
    neighborhoods.
    """

    matrix: sparse.csr_matrix
    scheme: str = "custom"
    row_standardized: bool = False

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise DomainError("proximity matrix must be square")
        if m.diagonal().any():
            raise DomainError("proximity matrix must have a zero diagonal")
        data = m.data
        if data.size and (not np.isfinite(data).all() or (data <= 0).any()):
            raise DomainError("stored weights must be strictly positive and finite")
        if self.row_standardized:
            sums = np.asarray(m.sum(axis=1)).ravel()
            nonempty = np.diff(m.indptr) > 0
            if nonempty.any() and np.abs(sums[nonempty] - 1.0).max() > ROW_SUM_TOL:
                raise DomainError("rows of a standardized matrix must sum to 1")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        """Indices j with w_ij != 0, ascending. i itself is never a member."""
        if not 0 <= i < self.n:
            raise IndexError(f"location index {i} outside 0..{self.n - 1}")
        row = self.matrix.indices[self.matrix.indptr[i] : self.matrix.indptr[i + 1]]
        return np.sort(row)

    def neighbor_counts(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        entries = [
            [int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order
        ]
        return {
            "n": self.n,
            "scheme": self.scheme,
            "row_standardized": self.row_standardized,
            "entries": entries,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProximityMatrix":
        n = int(doc["n"])
        entries = doc["entries"]
        rows = [int(e[0]) for e in entries]
        cols = [int(e[1]) for e in entries]
        vals = [float(e[2]) for e in entries]
        m = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return cls(
            matrix=m,
            scheme=str(doc.get("scheme", "custom")),
            row_standardized=bool(doc.get("row_standardized", False)),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ProximityMatrix":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def scheme_spec(scheme: str) -> tuple[str, float | None]:
    """Split a scheme string into (kind, parameter)."""
    if scheme == "custom":
        return "custom", None
    kind, _, param = scheme.partition(":")
    if kind not in ("knn", "radius") or not param:
        raise DomainError(f"unrecognized proximity scheme {scheme!r}")
    return kind, float(param)


def neighbors(w: ProximityMatrix, i: int) -> np.ndarray:
    """Set of neighbors of location i under w (ascending index array)."""
    return w.neighbors(i)


def row_standardize(
    raw, scheme: str = "custom"
) -> ProximityMatrix:
    """Divide every row of a raw nonnegative matrix by its row sum.

    The sparsity pattern is preserved. Raises IsolatedLocationError for any
    row whose sum is zero.
    """
    m = sparse.csr_matrix(raw, dtype=float)
    m.eliminate_zeros()
    if m.diagonal().any():
        raise DomainError("raw matrix must have a zero diagonal")
    if m.data.size and ((m.data < 0).any() or not np.isfinite(m.data).all()):
        raise DomainError("raw weights must be nonnegative and finite")
    sums = np.asarray(m.sum(axis=1)).ravel()
    empty = np.flatnonzero(sums <= 0)
    if empty.size:
        raise IsolatedLocationError(int(empty[0]))
    inv = sparse.diags(1.0 / sums)
    std = sparse.csr_matrix(inv @ m)
    return ProximityMatrix(matrix=std, scheme=scheme, row_standardized=True)


def knn_proximity(points: Sequence[GeoPoint] | np.ndarray, k: int) -> ProximityMatrix:
    """Row-standardized k-nearest-neighbor proximity matrix.

    Raw weights are inverse great-circle distances over the k closest other
    locations; ties at the k-th distance are broken by ascending index.
    """
    dist = pairwise_distances(points)
    n = dist.shape[0]
    if not 1 <= k <= n - 1:
        raise KOutOfRangeError(f"k={k} outside 1..{n - 1}")
    off = dist + np.diag(np.full(n, np.inf))
    if (off == 0).any():
        i, j = np.argwhere(off == 0)[0]
        raise DuplicateLocationError(
            f"locations {i} and {j} share identical coordinates"
        )
    rows = np.repeat(np.arange(n), k)
    cols = np.empty(n * k, dtype=np.int64)
    for i in range(n):
        # lexsort: distance first, index breaks ties deterministically
        order = np.lexsort((np.arange(n), off[i]))
        cols[i * k : (i + 1) * k] = order[:k]
    vals = 1.0 / dist[rows, cols]
    raw = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return row_standardize(raw, scheme=f"knn:{k}")


def radius_proximity(
    points: Sequence[GeoPoint] | np.ndarray, r_km: float
) -> ProximityMatrix:
    """Row-standardized radius proximity matrix.

    Entry (i, j) is present iff i != j and d_ij <= r_km; raw weights are
    inverse distances. The raw matrix is symmetric; rows may differ in size.
    Raises IsolatedLocationError if some location has no neighbor in range.
    """
    if not r_km > 0:
        raise DomainError("radius must be positive")
    dist = pairwise_distances(points)
    n = dist.shape[0]
    within = (dist <= r_km) & ~np.eye(n, dtype=bool)
    if (within & (dist == 0)).any():
        i, j = np.argwhere(within & (dist == 0))[0]
        raise DuplicateLocationError(
            f"locations {i} and {j} share identical coordinates"
        )
    rows, cols = np.nonzero(within)
    raw = sparse.csr_matrix((1.0 / dist[rows, cols], (rows, cols)), shape=(n, n))
    return row_standardize(raw, scheme=f"radius:{r_km:g}")


def raw_radius_matrix(
    points: Sequence[GeoPoint] | np.ndarray, r_km: float
) -> sparse.csr_matrix:
    """Non-standardized radius matrix (symmetric inverse-distance weights)."""
    if not r_km > 0:
        raise DomainError("radius must be positive")
    dist = pairwise_distances(points)
    n = dist.shape[0]
    within = (dist <= r_km) & ~np.eye(n, dtype=bool)
    rows, cols = np.nonzero(within)
    if rows.size and (dist[rows, cols] == 0).any():
        raise DuplicateLocationError("coincident locations within radius")
    return sparse.csr_matrix((1.0 / dist[rows, cols], (rows, cols)), shape=(n, n))
