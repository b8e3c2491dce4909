"""Spatial autoregressive regression with Gaussian and Student-t errors.

The package covers proximity-matrix construction from coordinates, SAR and
tSAR likelihood fitting with heteroscedastic error scales, power-transform
model selection, out-of-sample prediction with calibrated intervals, and a
Monte Carlo harness for comparing the estimators.
"""

from .distributions import (
    normal_cdf,
    normal_quantile,
    t_cdf,
    t_density,
    t_quantile,
)
from .geo import (
    GeoPoint,
    ProximityMatrix,
    great_circle_distance,
    knn_proximity,
    neighbors,
    pairwise_distances,
    radius_proximity,
    row_standardize,
)
from .sar import (
    SarFit,
    beta_inference,
    fit_sar,
    gls_beta,
    local_predictions,
    sar_nll,
    sar_profile_nll,
    sar_sigma2,
    sigma_y_inv_form,
    standardized_residuals,
)
from .tsar import (
    TsarFit,
    fit_tsar,
    s_hat,
    tsar_beta_gradient,
    tsar_beta_inference,
    tsar_nll,
    tsar_sigma2,
)
from .variance import (
    ErrorScale,
    OlsFit,
    local_empirical_variance,
    local_regression_variance_matrix,
    ols_fit,
)
from .boxcox import (
    BoxCoxSpec,
    SelectedModel,
    adjusted_loglik,
    bic,
    boxcox,
    inverse_boxcox,
    stepwise_select,
    tsar_companion,
)
from .predict import (
    IntervalPrediction,
    OosSite,
    binomial_lrt,
    confidence_interval,
    coverage,
    crossval_coverage,
    kfold_partition,
    oos_predict,
    oos_sigma2,
    oos_weights,
)
from .simstudy import (
    RegionPartition,
    StudyConfig,
    StudyResult,
    rmse,
    run_study,
    simulate_covariates,
    simulate_tsar,
)
from .dataio import SpatialDataset, load_dataset, load_fit, qq_pairs, save_fit

__version__ = "0.1.0"

__all__ = [
    "BoxCoxSpec", "ErrorScale", "GeoPoint", "IntervalPrediction", "OlsFit",
    "OosSite", "ProximityMatrix", "RegionPartition", "SarFit", "SelectedModel",
    "SpatialDataset", "StudyConfig", "StudyResult", "TsarFit",
    "adjusted_loglik", "beta_inference", "bic", "binomial_lrt", "boxcox",
    "confidence_interval", "coverage", "crossval_coverage", "fit_sar",
    "fit_tsar", "gls_beta", "great_circle_distance", "inverse_boxcox",
    "kfold_partition", "knn_proximity", "load_dataset", "load_fit",
    "local_empirical_variance", "local_predictions",
    "local_regression_variance_matrix", "neighbors", "normal_cdf",
    "normal_quantile", "ols_fit", "oos_predict", "oos_sigma2", "oos_weights",
    "pairwise_distances", "qq_pairs", "radius_proximity", "rmse",
    "row_standardize", "run_study", "s_hat", "sar_nll", "sar_profile_nll",
    "sar_sigma2", "save_fit", "sigma_y_inv_form", "simulate_covariates",
    "simulate_tsar", "standardized_residuals", "stepwise_select", "t_cdf",
    "t_density", "t_quantile", "tsar_beta_gradient", "tsar_beta_inference",
    "tsar_companion", "tsar_nll", "tsar_sigma2",
]
