from .composite import (
    PredictorChoice,
    PredictorTag,
    composite_select,
    estimate_block_error,
    load_coefficients,
    save_coefficients,
    select_for_block,
)
from .interp import InterpLevelPlan, InterpMethod, build_plan, interp_predict
from .lorenzo import lorenzo_predict
from .regression import RegressionCoefficients, compute_regression_coefficients, regression_predict

__all__ = [
    "InterpLevelPlan",
    "InterpMethod",
    "PredictorChoice",
    "PredictorTag",
    "RegressionCoefficients",
    "build_plan",
    "composite_select",
    "compute_regression_coefficients",
    "estimate_block_error",
    "interp_predict",
    "load_coefficients",
    "lorenzo_predict",
    "regression_predict",
    "save_coefficients",
    "select_for_block",
]
