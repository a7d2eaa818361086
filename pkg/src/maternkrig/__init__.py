"""Kriging with misspecified Matérn smoothness: kernels, designs, and rate studies."""
from .designs import (
    Design,
    DesignMetrics,
    Domain,
    design_metrics,
    exponential_spacing_sample,
    fill_distance,
    gen_grid,
    gen_halton,
    gen_random,
    mesh_ratio,
    separation_radius,
)
from .exceptions import (
    ConfigurationError,
    ContractError,
    DegenerateDesignError,
    ExperimentError,
    IllConditionedError,
)
from .experiments import (
    ExperimentConfig,
    RateFit,
    ols_fit,
    reproduce_table2,
    run_rate_study,
    table2_configs,
    theoretical_slope,
)
from .gp import (
    ErrorNormSpec,
    GpSample,
    KrigingInterpolator,
    cholesky_spd,
    corr_matrix,
    empirical_error,
    fit_kriging,
    power_function,
    predict,
    quasi_power,
    sample_gp,
)
from .kernels import KernelSpec, SmoothnessPair, matern_corr, matern_spectral, wendland_corr
from .specfun import bessel_k, gamma_fn

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "DegenerateDesignError",
    "Design",
    "DesignMetrics",
    "Domain",
    "ErrorNormSpec",
    "ExperimentConfig",
    "ExperimentError",
    "GpSample",
    "IllConditionedError",
    "KernelSpec",
    "KrigingInterpolator",
    "RateFit",
    "SmoothnessPair",
    "bessel_k",
    "cholesky_spd",
    "corr_matrix",
    "design_metrics",
    "empirical_error",
    "exponential_spacing_sample",
    "fill_distance",
    "fit_kriging",
    "gamma_fn",
    "gen_grid",
    "gen_halton",
    "gen_random",
    "matern_corr",
    "matern_spectral",
    "mesh_ratio",
    "ols_fit",
    "power_function",
    "predict",
    "quasi_power",
    "reproduce_table2",
    "run_rate_study",
    "sample_gp",
    "separation_radius",
    "table2_configs",
    "theoretical_slope",
    "wendland_corr",
]
