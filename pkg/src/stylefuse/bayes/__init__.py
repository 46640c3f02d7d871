"""Hierarchical pairwise-preference model fit by a from-scratch NUTS sampler."""

from stylefuse.bayes.model import (
    BayesData,
    BayesParams,
    ModelConfig,
    Posterior,
    grad_log_posterior,
    log_posterior,
    make_posterior,
)
from stylefuse.bayes.nuts import NutsConfig, NutsResult, leapfrog, nuts_sample
from stylefuse.bayes.diagnostics import diagnostics, ess_bulk, split_rhat
from stylefuse.bayes.correlation import (
    CorrelationResult,
    FitConfig,
    build_bayes_data,
    fit_correlation_data,
    fit_feature_correlation,
    forest_plot,
    logit_shift_to_probability,
    results_to_csv,
)

__all__ = [
    "BayesData",
    "BayesParams",
    "ModelConfig",
    "Posterior",
    "log_posterior",
    "grad_log_posterior",
    "make_posterior",
    "NutsConfig",
    "NutsResult",
    "leapfrog",
    "nuts_sample",
    "diagnostics",
    "split_rhat",
    "ess_bulk",
    "CorrelationResult",
    "FitConfig",
    "build_bayes_data",
    "fit_correlation_data",
    "fit_feature_correlation",
    "forest_plot",
    "logit_shift_to_probability",
    "results_to_csv",
]
