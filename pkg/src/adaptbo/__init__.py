"""Bayesian optimization with iteration-decayed mean conditioning and EI jitter,
robust stochastic benchmark objectives, and run-comparison statistics."""

from .acquisition import AcquisitionQuery, expected_improvement, propose_next
from .adaptive import AdaptiveSchedule, acquisition_jitter, conditioning_offset
from .gp import CholeskyError, Dataset, FittedGp, KernelParams, fit, matern52, posterior
from .objectives import ObjectiveSpec, analytic_expected_robust, robust_objective
from .optimizer import (
    ConfigError,
    OptimizationConfig,
    OptimizationError,
    RunTrace,
    run,
    run_batch,
    run_decoupled,
    tune_kernel_hyperparameters,
)
from .stats import ComparisonReport, compare, stability_check

__version__ = "0.1.0"
