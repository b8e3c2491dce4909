"""Command line surface: proximity | fit | select | predict | crossval |
study | qq | simulate.

Exit codes: 0 on success, 1 on validation errors (bad flags, malformed
files), 2 on numerical failures. Flags override values read from config
files. All randomness in a subcommand flows from its --seed flag.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from .boxcox import (
    DEFAULT_L_GRID,
    boxcox,
    inverse_boxcox,
    stepwise_select,
    tsar_companion,
)
from .dataio import (
    fit_from_dict,
    fit_to_dict,
    load_dataset,
    qq_pairs,
    write_qq_csv,
    write_residuals_csv,
)
from .errors import DomainError, HeavySarError, NumericalError
from .geo import ProximityMatrix, knn_proximity, radius_proximity
from .predict import confidence_interval, crossval_coverage, oos_sigma2, oos_weights
from .sar import fit_sar
from .simstudy import StudyConfig, run_study, simulate_tsar
from .tsar import fit_tsar
from .variance import ErrorScale, local_regression_variance_matrix, ols_fit

LAMBDA_KNOWN_CAVEAT = (
    "note: coefficient standard errors treat the spatial dependence parameter "
    "as known and are therefore too small"
)


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise DomainError(f"could not parse number list {text!r}") from exc


def _covariate_names(text: str) -> list[str]:
    names = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not names:
        raise DomainError("covariate list is empty")
    return names


def _proximity_from_flags(args, dataset):
    given = [x for x in (args.proximity, args.knn, args.r_km) if x is not None]
    if len(given) != 1:
        raise DomainError("give exactly one of --proximity, --knn, --r-km")
    if args.proximity is not None:
        w = ProximityMatrix.load(args.proximity)
        if w.n != dataset.n:
            raise DomainError(
                f"proximity matrix size {w.n} does not match dataset size {dataset.n}"
            )
        return w
    if args.knn is not None:
        return knn_proximity(dataset.points, args.knn)
    return radius_proximity(dataset.points, args.r_km)


def _sigma_eps_from_flag(flag: str, x, y, w) -> ErrorScale:
    if flag == "identity":
        return ErrorScale.identity(w.n)
    if flag == "local-regression":
        return local_regression_variance_matrix(x, y, w)
    if flag.startswith("file:"):
        scale = ErrorScale.load(flag[len("file:"):])
        if scale.n != w.n:
            raise DomainError("error scale length does not match dataset")
        return scale
    raise DomainError(f"unknown --sigma-eps value {flag!r}")


def _cmd_proximity(args) -> int:
    dataset = load_dataset(args.data)
    w = _proximity_from_flags(args, dataset)
    w.save(args.out)
    print(f"wrote {w.scheme} proximity matrix for {w.n} locations to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    dataset = load_dataset(args.data)
    names = _covariate_names(args.covariates) if args.covariates else []
    x = dataset.design(names)
    y = dataset.column(args.response)
    w = _proximity_from_flags(args, dataset)
    sigma_eps = _sigma_eps_from_flag(args.sigma_eps, x, y, w)
    if args.family == "sar":
        fit = fit_sar(y, x, w, sigma_eps)
    else:
        fit = fit_tsar(y, x, w, sigma_eps, nu=args.nu)
    doc = fit_to_dict(fit)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    if args.residuals_csv:
        write_residuals_csv(fit, args.residuals_csv)
    label = ["intercept"] + names
    print(f"{fit.model} fit: loglik={fit.loglik:.4f} lambda={fit.lam:.4f} "
          f"sigma={fit.sigma:.4f}" + (f" nu={fit.nu:.2f}" if fit.model == "tsar" else ""))
    for i, name in enumerate(label):
        print(f"  {name:>12}: {fit.beta[i]: .5f}  se={fit.se_beta[i]:.5f} "
              f"z={fit.z_scores[i]: .3f} p={fit.p_values[i]:.4g}")
    for warning in fit.warnings:
        print(f"  warning: {warning}")
    print(LAMBDA_KNOWN_CAVEAT)
    return 0


def _cmd_select(args) -> int:
    dataset = load_dataset(args.data)
    names = _covariate_names(args.covariates)
    pool = {name: dataset.column(name) for name in names}
    response = dataset.column(args.response)
    w = _proximity_from_flags(args, dataset)
    l_grid = tuple(_parse_floats(args.l_grid)) if args.l_grid else DEFAULT_L_GRID
    selected = stepwise_select(response, pool, w, m=args.m, l_grid=l_grid,
                               alpha=args.alpha)
    models = {"sar": selected}
    if args.family == "sar+tsar":
        models["tsar"] = tsar_companion(selected, w)
    best = min(models.values(), key=lambda mod: mod.bic)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({key: mod.to_dict() for key, mod in models.items()}, fh, indent=1)
    print("iteration  l          BIC   max_p     dropped")
    for it, row in enumerate(selected.trace, start=1):
        dropped = row.dropped if row.dropped is not None else "-"
        print(f"{it:>9}  {row.l:<8.4g} {row.bic:>10.2f}  {row.max_p:<8.4g} {dropped}")
    for key, mod in models.items():
        print(f"{key}: BIC={mod.bic:.2f} l={mod.spec.l:.4g} "
              f"covariates={','.join(mod.covariates) or '(intercept only)'}")
    print(f"best family by BIC: {best.family}")
    return 0


def _load_fit_or_selected(path):
    """Accept a plain fit JSON or a select output; return (fit, m, l, covariates)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "model" in doc:
        return fit_from_dict(doc), None, None, None
    # select output: prefer the tsar companion when present, else the sar model
    for key in ("tsar", "sar"):
        if key in doc:
            entry = doc[key]
            return (
                fit_from_dict(entry["fit"]),
                float(entry["m"]),
                float(entry["l"]),
                list(entry["covariates"]),
            )
    raise DomainError(f"{path} is neither a fit nor a selection artifact")


def _cmd_predict(args) -> int:
    fit, m, l, sel_covs = _load_fit_or_selected(args.fit)
    insample = load_dataset(args.insample)
    sites = load_dataset(args.sites)
    names = _covariate_names(args.covariates) if args.covariates else sel_covs
    if names is None:
        raise DomainError("--covariates required with a plain fit artifact")
    if args.m is not None:
        m = args.m
    if args.l is not None:
        l = args.l
    transform = m is not None and l is not None
    x_in = insample.design(names)
    y_in = insample.column(args.response)
    if transform:
        y_model = boxcox(y_in, m, l)
    else:
        y_model = y_in
    if args.original_scale and not transform:
        raise DomainError("--original-scale needs a transform (from selection or --m/--l)")
    x_sites = sites.design(names)
    resid_lm = ols_fit(x_in, y_model).residuals
    rows = []
    for i in range(sites.n):
        idx, wts = oos_weights((float(sites.lat[i]), float(sites.lon[i])),
                               insample.points, args.scheme)
        sigma_o = oos_sigma2(resid_lm, idx)
        dev = y_model[idx] - x_in[idx] @ fit.beta
        point = float(fit.beta @ x_sites[i] + fit.lam * (wts @ dev))
        interval = confidence_interval(point, sigma_o, fit, args.alpha)
        lo, hi, pt = interval.lo, interval.hi, interval.point
        if args.original_scale:
            lo, pt, hi = (float(inverse_boxcox(v, m, l)) for v in (lo, pt, hi))
        rows.append((sites.ids[i], pt, lo, hi))
    out = args.out or "predictions.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "point", "lo", "hi"])
        for sid, pt, lo, hi in rows:
            writer.writerow([sid, repr(pt), repr(lo), repr(hi)])
    print(f"wrote {len(rows)} predictions to {out} "
          f"({'original' if args.original_scale else 'model'} scale, alpha={args.alpha})")
    return 0


def _cmd_crossval(args) -> int:
    dataset = load_dataset(args.data)
    names = _covariate_names(args.covariates)
    x = dataset.design(names)
    y = dataset.column(args.response)
    if args.m is not None and args.l is not None:
        y = boxcox(y, args.m, args.l)
    families = ("sar", "tsar") if args.family == "both" else (args.family,)
    report = crossval_coverage(
        dataset.points, x, y, scheme=args.scheme, families=families,
        sigma_source=args.sigma_eps, folds=args.folds, seed=args.seed,
        alphas=tuple(_parse_floats(args.alphas)), nu=args.nu,
    )
    print("family  level  coverage  outside      n  lrt_stat  p_value")
    for row in report.rows:
        print(f"{row.family:>6}  {1 - row.alpha:>5.0%}  {row.coverage:>8.2%} "
              f"{row.outside:>8} {row.n:>6}  {row.lrt_statistic:>8.4f}  {row.p_value:.4f}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["family", "alpha", "coverage", "outside", "n",
                             "lrt_statistic", "p_value"])
            for row in report.rows:
                writer.writerow([row.family, row.alpha, repr(row.coverage),
                                 row.outside, row.n, repr(row.lrt_statistic),
                                 repr(row.p_value)])
        print(f"wrote coverage table to {args.out}")
    return 0


_STUDY_KEYS = {
    "n", "k", "nu", "lambda", "beta", "window", "scales",
    "replications", "seed", "locations",
}


def _study_config_from_file(path) -> StudyConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    unknown = set(doc) - _STUDY_KEYS
    if unknown:
        raise DomainError(f"unknown study config keys: {sorted(unknown)}")
    kwargs = {}
    for key in ("n", "k", "replications", "seed"):
        if key in doc:
            kwargs[key] = int(doc[key])
    for key in ("nu",):
        if key in doc:
            kwargs[key] = float(doc[key])
    if "lambda" in doc:
        kwargs["lam"] = float(doc["lambda"])
    for key in ("beta", "window", "scales"):
        if key in doc:
            kwargs[key] = tuple(float(v) for v in doc[key])
    if "locations" in doc and doc["locations"] is not None:
        kwargs["locations"] = tuple((float(a), float(b)) for a, b in doc["locations"])
    return StudyConfig(**kwargs)


def _cmd_study(args) -> int:
    config = _study_config_from_file(args.config) if args.config else StudyConfig()
    if args.locations:
        locs = load_dataset(args.locations)
        config = dataclasses.replace(
            config, locations=tuple(map(tuple, locs.points)), n=locs.n
        )
    result = run_study(config, replications=args.replications, seed=args.seed,
                       n_jobs=args.jobs)
    result.to_csv(args.out)
    print(f"study complete: {result.replications} replications, "
          f"{result.n_failures} failures; wrote {args.out}")
    header = f"{'model':>5} {'rmse_beta':>10} {'rmse_lam':>9} {'rmse_s':>8} " \
             f"{'rmse_nu':>8} {'mean_ll':>10} {'mean_lam':>9} {'mean_nu':>8}"
    print(header)
    for row in result.rows:
        rn = f"{row.rmse_nu:.3f}" if row.rmse_nu is not None else "-"
        mn = f"{row.mean_nu:.2f}" if row.mean_nu is not None else "-"
        print(f"{row.model:>5} {row.rmse_beta:>10.4f} {row.rmse_lambda:>9.4f} "
              f"{row.rmse_s:>8.4f} {rn:>8} {row.mean_ll:>10.1f} "
              f"{row.mean_lambda:>9.4f} {mn:>8}")
    return 0


def _cmd_qq(args) -> int:
    with open(args.residuals, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "std_residual" not in reader.fieldnames:
            raise DomainError("residuals CSV must carry a std_residual column")
        values = [float(row["std_residual"]) for row in reader]
    pairs = qq_pairs(np.asarray(values), reference=args.reference, nu=args.nu)
    write_qq_csv(pairs, args.out)
    print(f"wrote {len(values)} qq pairs ({args.reference} reference) to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    config = _study_config_from_file(args.config) if args.config else StudyConfig()
    overrides = {
        key: val
        for key, val in (("n", args.n), ("k", args.k), ("nu", args.nu),
                         ("lam", args.lam))
        if val is not None
    }
    if overrides:
        config = dataclasses.replace(config, **overrides)
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=args.seed, spawn_key=(0,)))
    )
    if config.locations is not None:
        locations = np.asarray(config.locations, dtype=float)
    else:
        lat_min, lat_max, lon_min, lon_max = config.window
        locations = np.column_stack([
            rng.uniform(lat_min, lat_max, config.n),
            rng.uniform(lon_min, lon_max, config.n),
        ])
    y, x, _w, sigma_true = simulate_tsar(config, config.regions(), locations, rng)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        p = x.shape[1] - 1
        writer.writerow(["id", "lat", "lon"] + [f"x{j}" for j in range(1, p + 1)] + ["y"])
        for i in range(config.n):
            writer.writerow(
                [f"s{i}", repr(float(locations[i, 0])), repr(float(locations[i, 1]))]
                + [repr(float(v)) for v in x[i, 1:]]
                + [repr(float(y[i]))]
            )
    if args.sigma_out:
        sigma_true.save(args.sigma_out)
    print(f"simulated tSAR dataset with n={config.n} written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heavysar",
        description="SAR and tSAR spatial regression toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_proximity_flags(p):
        p.add_argument("--proximity", help="proximity matrix JSON file")
        p.add_argument("--knn", type=int, help="k nearest neighbors")
        p.add_argument("--r-km", type=float, dest="r_km", help="radius in kilometers")

    p = sub.add_parser("proximity", help="build a proximity matrix from a dataset")
    p.add_argument("--data", required=True)
    add_proximity_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_proximity)

    p = sub.add_parser("fit", help="fit a SAR or tSAR model")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", default="", help="comma separated column names")
    p.add_argument("--family", choices=("sar", "tsar"), default="sar")
    p.add_argument("--nu", type=float, default=None,
                   help="fixed degrees of freedom; omit to estimate over [3, 20]")
    p.add_argument("--sigma-eps", dest="sigma_eps", default="identity",
                   help="identity | local-regression | file:PATH")
    add_proximity_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--residuals-csv", dest="residuals_csv")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("select", help="stepwise power-transform model selection")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--m", type=float, default=10.0)
    p.add_argument("--l-grid", dest="l_grid", default="")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--family", choices=("sar", "sar+tsar"), default="sar+tsar")
    add_proximity_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("predict", help="out-of-sample prediction with intervals")
    p.add_argument("--fit", required=True)
    p.add_argument("--insample", required=True)
    p.add_argument("--sites", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", default="")
    p.add_argument("--scheme", default="knn:30", help="knn:K or radius:R")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--l", type=float, default=None)
    p.add_argument("--original-scale", dest="original_scale", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("crossval", help="k-fold out-of-sample coverage evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--scheme", default="knn:30")
    p.add_argument("--family", choices=("sar", "tsar", "both"), default="both")
    p.add_argument("--sigma-eps", dest="sigma_eps", default="local-regression",
                   choices=("identity", "local-regression"))
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alphas", default="0.1,0.05,0.01")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--l", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_crossval)

    p = sub.add_parser("study", help="run the estimator comparison study")
    p.add_argument("--config", help="StudyConfig JSON file")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--locations", help="dataset CSV supplying fixed coordinates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("qq", help="qq-plot data from a residuals CSV")
    p.add_argument("--residuals", required=True)
    p.add_argument("--reference", choices=("normal", "t"), default="normal")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_qq)

    p = sub.add_parser("simulate", help="simulate one tSAR dataset")
    p.add_argument("--config", help="StudyConfig JSON file")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--lambda", type=float, default=None, dest="lam")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma-out", dest="sigma_out")
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (HeavySarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
