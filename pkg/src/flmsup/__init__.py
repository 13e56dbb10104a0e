"""Small-uniform statistic for inference in the scalar-on-function linear model."""

from .fnspace import (
    Dataset,
    FunctionalSample,
    Grid,
    brownian_eigenelements,
    brownian_sample,
    coefficient_function,
    generate_dataset,
    inner_product,
    snr_sigma,
)
from .fpca import (
    Eigensystem,
    FpcaFit,
    RegularizationScheme,
    eigensolve,
    empirical_covariance,
    fit,
    predict,
    t_hat,
    truncation,
)
from .gproc import GpKernel, SupSimResult, kernel_eval, quantile, sample_index_points, simulate_sup
from .smalluniform import (
    FractionalObjective,
    OptimizerConfig,
    OptimizerReport,
    maximize,
    small_uniform_statistic,
)
from .testing import GpSettings, PipelineError, TestResult, TestSpec, run_test, schedule_params

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FunctionalSample",
    "Grid",
    "brownian_eigenelements",
    "brownian_sample",
    "coefficient_function",
    "generate_dataset",
    "inner_product",
    "snr_sigma",
    "Eigensystem",
    "FpcaFit",
    "RegularizationScheme",
    "eigensolve",
    "empirical_covariance",
    "fit",
    "predict",
    "t_hat",
    "truncation",
    "GpKernel",
    "SupSimResult",
    "kernel_eval",
    "quantile",
    "sample_index_points",
    "simulate_sup",
    "FractionalObjective",
    "OptimizerConfig",
    "OptimizerReport",
    "maximize",
    "small_uniform_statistic",
    "GpSettings",
    "PipelineError",
    "TestResult",
    "TestSpec",
    "run_test",
    "schedule_params",
]
