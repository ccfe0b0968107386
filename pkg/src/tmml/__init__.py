"""Minimum message length estimation and variable selection for Student-t regression."""

from .core import (CodelengthBreakdown, DataError, Dataset, ModelStructure, Scheme, TParams,
                   load_boston, load_dataset)
from .codelength import SingularDesignError, total_message_length
from .criteria import Criterion
from .distributions import DofGrid, TSpec, build_dof_grid, js_divergence, kl_divergence, neg_log_likelihood
from .estimation import EMConfig, FitError, FitResult, fit_many, ml_fit, mml_fit, optimize_tau
from .estimators import MMLSelector, StudentTRegressor
from .search import (SelectionReport, enumerate_structures, lasso_path_structures, marginal_inclusion,
                     model_posteriors, score_table, select)
from .simulation import SimConfig, boston_cv, run_experiment

__version__ = "0.1.0"

__all__ = [
    "CodelengthBreakdown", "Criterion", "DataError", "Dataset", "DofGrid", "EMConfig", "FitError",
    "FitResult", "MMLSelector", "ModelStructure", "Scheme", "SelectionReport", "SimConfig",
    "SingularDesignError", "StudentTRegressor", "TParams", "TSpec", "boston_cv", "build_dof_grid",
    "enumerate_structures", "fit_many", "js_divergence", "kl_divergence", "lasso_path_structures",
    "load_boston", "load_dataset", "marginal_inclusion", "ml_fit", "mml_fit", "model_posteriors",
    "neg_log_likelihood", "optimize_tau", "run_experiment", "score_table", "select",
    "total_message_length",
]
