"""Individual-tree above-ground biomass from height, with uncertainty indices."""

from .allometry import LogLinearKind, LogLinearModel, fit_loglinear, predict_loglinear
from .data_model import (
    Biome,
    Dataset,
    FilterRules,
    Schema,
    TreeRecord,
    filter_records,
    parse_dataset,
    read_dataset,
    split_train_test,
)
from .evaluation import (
    EvalReport,
    bias,
    binned_residuals,
    evaluate,
    r_squared,
    relative_rmse,
    rmse,
    stand_relative_error,
    stand_report,
)
from .forest import ForestConfig, ForestModel, fit_forest, predict_forest
from .gpr import (
    GprHyperparams,
    GprModel,
    SearchConfig,
    TransformSpec,
    build_gram,
    fit_gpr,
    nll,
    predict_gpr,
    rbf_kernel,
)
from .models import FitOptions, fit_model
from .persistence import load_model, save_model
from .uncertainty import fitting_uncertainty, model_uncertainty

__version__ = "0.1.0"

__all__ = [
    "Biome",
    "Dataset",
    "EvalReport",
    "FilterRules",
    "FitOptions",
    "ForestConfig",
    "ForestModel",
    "GprHyperparams",
    "GprModel",
    "LogLinearKind",
    "LogLinearModel",
    "Schema",
    "SearchConfig",
    "TransformSpec",
    "TreeRecord",
    "bias",
    "binned_residuals",
    "build_gram",
    "evaluate",
    "filter_records",
    "fit_forest",
    "fit_gpr",
    "fit_loglinear",
    "fit_model",
    "fitting_uncertainty",
    "load_model",
    "model_uncertainty",
    "nll",
    "parse_dataset",
    "predict_forest",
    "predict_gpr",
    "predict_loglinear",
    "r_squared",
    "rbf_kernel",
    "read_dataset",
    "relative_rmse",
    "rmse",
    "save_model",
    "split_train_test",
    "stand_relative_error",
    "stand_report",
]
