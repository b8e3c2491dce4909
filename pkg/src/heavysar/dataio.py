"""Dataset ingestion, fit persistence and plot-ready diagnostic exports.

Datasets are CSV files with an ``id`` label column, ``lat``/``lon``
coordinates and any number of numeric columns. Fit artifacts persist as JSON
with shortest exact float representations, so every numeric field survives a
save/load round trip bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .distributions import normal_quantile, t_quantile
from .errors import (
    DomainError,
    MissingColumnError,
    NonFiniteValueError,
    ParseError,
    SchemaMismatchError,
)
from .geo import GeoPoint
from .sar import SarFit
from .tsar import TsarFit

REQUIRED_COLUMNS = ("id", "lat", "lon")


@dataclass
class SpatialDataset:
    """Geographic points with a set of named numeric columns."""

    ids: list[str]
    lat: np.ndarray
    lon: np.ndarray
    columns: dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def points(self) -> np.ndarray:
        """(n, 2) array of (lat, lon) rows."""
        return np.column_stack([self.lat, self.lon])

    def geopoints(self) -> list[GeoPoint]:
        return [GeoPoint(float(a), float(b)) for a, b in zip(self.lat, self.lon)]

    def design(self, names) -> np.ndarray:
        """Design matrix with an intercept column followed by the named columns."""
        cols = [np.ones(self.n)]
        for name in names:
            if name not in self.columns:
                raise MissingColumnError(f"column {name!r} not in dataset")
            cols.append(self.columns[name])
        return np.column_stack(cols)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise MissingColumnError(f"column {name!r} not in dataset")
        return self.columns[name]


def load_dataset(path) -> SpatialDataset:
    """Read a dataset CSV; row order is preserved.

    Requires a header with at least id, lat, lon; all non-id columns must
    parse as finite floats ('.' decimal separator).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "", "empty file") from None
        header = [h.strip() for h in header]
        for required in REQUIRED_COLUMNS:
            if required not in header:
                raise MissingColumnError(f"required column {required!r} missing")
        seen = set()
        for h in header:
            if h in seen:
                raise ParseError(1, h, "duplicate column name")
            seen.add(h)
        numeric_names = [h for h in header if h != "id"]
        ids: list[str] = []
        values: dict[str, list[float]] = {name: [] for name in numeric_names}
        pos = {name: header.index(name) for name in header}
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(line_no, "", f"expected {len(header)} fields, got {len(row)}")
            ids.append(row[pos["id"]].strip())
            for name in numeric_names:
                cell = row[pos[name]].strip()
                try:
                    val = float(cell)
                except ValueError:
                    raise ParseError(line_no, name, f"not a number: {cell!r}") from None
                if not np.isfinite(val):
                    raise NonFiniteValueError(
                        f"non-finite value in column {name!r} at line {line_no}"
                    )
                values[name].append(val)
    lat = np.asarray(values.pop("lat"), dtype=float)
    lon = np.asarray(values.pop("lon"), dtype=float)
    if lat.size == 0:
        raise ParseError(2, "", "no data rows")
    if np.abs(lat).max() > 90 or np.abs(lon).max() > 180:
        raise DomainError("coordinates outside valid ranges")
    return SpatialDataset(
        ids=ids, lat=lat, lon=lon,
        columns={k: np.asarray(v, dtype=float) for k, v in values.items()},
    )


def qq_pairs(std_residuals, reference: str = "normal", nu: float | None = None) -> np.ndarray:
    """(theoretical, empirical) quantile pairs for a qq plot.

    Empirical values are the sorted residuals; theoretical quantiles sit at
    probabilities (i - 0.5)/n under the chosen reference distribution.
    """
    res = np.sort(np.asarray(std_residuals, dtype=float).ravel())
    n = res.size
    if n == 0:
        raise DomainError("residual vector must not be empty")
    probs = (np.arange(1, n + 1) - 0.5) / n
    if reference == "normal":
        theo = np.array([normal_quantile(p) for p in probs])
    elif reference == "t":
        if nu is None or nu <= 0:
            raise DomainError("t reference requires positive degrees of freedom")
        theo = np.array([t_quantile(p, nu) for p in probs])
    else:
        raise DomainError(f"unknown reference {reference!r}")
    return np.column_stack([theo, res])


def write_qq_csv(pairs: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theoretical", "empirical"])
        for theo, emp in pairs:
            writer.writerow([repr(float(theo)), repr(float(emp))])


def write_residuals_csv(fit, path) -> None:
    """Export residual diagnostics as CSV (index, residual, std_residual, fitted)."""
    if fit.residuals is None:
        raise DomainError("fit artifact does not carry residual vectors")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "residual", "std_residual", "fitted"])
        for i in range(fit.residuals.size):
            writer.writerow([
                i,
                repr(float(fit.residuals[i])),
                repr(float(fit.std_residuals[i])),
                repr(float(fit.fitted[i])),
            ])


# -- fit persistence -----------------------------------------------------------

def fit_to_dict(fit) -> dict:
    doc = {
        "model": fit.model,
        "beta": [float(b) for b in fit.beta],
        "lambda": float(fit.lam),
        "sigma": float(fit.sigma),
        "loglik": float(fit.loglik),
        "se_beta": [float(v) for v in fit.se_beta],
        "z": [float(v) for v in fit.z_scores],
        "p": [float(v) for v in fit.p_values],
        "warnings": list(fit.warnings),
    }
    if fit.model == "tsar":
        doc["nu"] = float(fit.nu)
        doc["s_hat"] = float(fit.s_hat)
        doc["nu_estimated"] = bool(fit.nu_estimated)
    return doc


def save_fit(fit, path) -> None:
    """Persist a fit artifact as JSON (floats keep full precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit_to_dict(fit), fh, indent=1)


_SAR_SCHEMA = {
    "beta": list, "lambda": float, "sigma": float, "loglik": float,
    "se_beta": list, "z": list, "p": list, "warnings": list,
}
_TSAR_EXTRA = {"nu": float, "s_hat": float, "nu_estimated": bool}


def _check_schema(doc: dict, schema: dict) -> None:
    for key, kind in schema.items():
        if key not in doc:
            raise SchemaMismatchError(key, f"missing key {key!r}")
        val = doc[key]
        if kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise SchemaMismatchError(key, f"key {key!r} must be a number")
        elif not isinstance(val, kind):
            raise SchemaMismatchError(key, f"key {key!r} must be {kind.__name__}")


def fit_from_dict(doc: dict):
    """Rebuild a fit artifact from its JSON document.

    Residual vectors are not part of the JSON schema (they export as CSV),
    so the loaded artifact carries parameters and inference fields only.
    """
    model = doc.get("model")
    if model not in ("sar", "tsar"):
        raise SchemaMismatchError("model", f"unknown model {model!r}")
    _check_schema(doc, _SAR_SCHEMA)
    common = dict(
        beta=np.asarray(doc["beta"], dtype=float),
        lam=float(doc["lambda"]),
        sigma=float(doc["sigma"]),
        loglik=float(doc["loglik"]),
        se_beta=np.asarray(doc["se_beta"], dtype=float),
        z_scores=np.asarray(doc["z"], dtype=float),
        p_values=np.asarray(doc["p"], dtype=float),
        warnings=list(doc["warnings"]),
    )
    if model == "sar":
        return SarFit(**common)
    _check_schema(doc, _TSAR_EXTRA)
    return TsarFit(nu=float(doc["nu"]), nu_estimated=bool(doc["nu_estimated"]),
                   **common)


def load_fit(path):
    with open(path, encoding="utf-8") as fh:
        return fit_from_dict(json.load(fh))
