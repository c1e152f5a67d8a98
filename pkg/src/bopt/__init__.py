"""Bayesian optimization with Gaussian process surrogates.

The pieces: exact GP regression (`gp`), closed-form acquisition functions
(`acquisition`), a deterministic global maximizer for them (`direct`), a
sequential optimization session (`optimizer`), pairwise preference learning
through a probit likelihood (`preference`), benchmark objectives and
simulated users (`benchmarks`), a command-line front end (`cli`), and an
HTTP service for interactive preference galleries (`service`).
"""

from .acquisition import (
    AcquisitionSpec,
    Incumbent,
    expected_improvement,
    gp_ucb,
    probability_of_improvement,
    select_incumbent,
    ucb_schedule,
)
from .direct import MaximizerBudget, MaximizeResult, direct_maximize, multistart_maximize
from .exceptions import (
    ConditioningError,
    HyperparameterFitWarning,
    InvalidObjectiveError,
    StateConflictError,
)
from .gp import (
    GaussianProcess,
    ObservationSet,
    PosteriorSummary,
    fit_hyperparameters,
    log_marginal_likelihood,
    posterior,
    sample_prior,
)
from .kernels import (
    KernelSpec,
    cross_kernel,
    kernel_eval,
    kernel_matrix,
    matern,
    squared_exp_ard,
    squared_exp_iso,
)
from .benchmarks import (
    OBJECTIVES,
    SimulatedUser,
    BenchmarkObjective,
    gap_metric,
    get_objective,
    run_preference_benchmark,
    run_scalar_benchmark,
)
from .optimizer import BayesianOptimizer, nudge_off_duplicates, space_filling_seeds
from .preference import (
    LaplaceResult,
    PreferenceDataset,
    PreferenceGaussianProcess,
    PreferenceOptimizer,
    laplace_map,
    preference_posterior,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionSpec",
    "BayesianOptimizer",
    "ConditioningError",
    "GaussianProcess",
    "HyperparameterFitWarning",
    "Incumbent",
    "InvalidObjectiveError",
    "KernelSpec",
    "LaplaceResult",
    "MaximizeResult",
    "MaximizerBudget",
    "OBJECTIVES",
    "ObservationSet",
    "PosteriorSummary",
    "PreferenceDataset",
    "PreferenceGaussianProcess",
    "PreferenceOptimizer",
    "SimulatedUser",
    "StateConflictError",
    "BenchmarkObjective",
    "cross_kernel",
    "direct_maximize",
    "expected_improvement",
    "fit_hyperparameters",
    "gap_metric",
    "get_objective",
    "gp_ucb",
    "kernel_eval",
    "kernel_matrix",
    "laplace_map",
    "log_marginal_likelihood",
    "matern",
    "multistart_maximize",
    "nudge_off_duplicates",
    "posterior",
    "preference_posterior",
    "probability_of_improvement",
    "run_preference_benchmark",
    "run_scalar_benchmark",
    "sample_prior",
    "select_incumbent",
    "space_filling_seeds",
    "squared_exp_ard",
    "squared_exp_iso",
    "ucb_schedule",
    "__version__",
]
