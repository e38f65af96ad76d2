"""Ordinal thresholds and losses."""
from .thresholds import (
    ThresholdMode,
    Thresholds,
    ThresholdParams,
    build_thresholds,
    backprop_thresholds,
    params_from_thresholds,
    default_threshold_params,
    interval_of,
    interval_bounds,
    predict_level,
    project_ordered,
    project_thresholds,
    project_symmetric,
)
from .losses import (
    LossKind,
    LossSpec,
    LossValueGrad,
    BatchLoss,
    log_sigmoid,
    log_prob_level,
    prob_level,
    ordinal_nll,
    ordinal_at,
    ordinal_it,
    simple_bt,
    margin_bt,
    scaled_bt,
    soft_label,
    reg_penalty,
    example_losses,
    batch_objective,
)

__all__ = [
    "ThresholdMode", "Thresholds", "ThresholdParams", "build_thresholds", "backprop_thresholds",
    "params_from_thresholds", "default_threshold_params", "interval_of", "interval_bounds",
    "predict_level", "project_ordered", "project_thresholds", "project_symmetric",
    "LossKind", "LossSpec", "LossValueGrad", "BatchLoss", "log_sigmoid", "log_prob_level",
    "prob_level", "ordinal_nll", "ordinal_at", "ordinal_it", "simple_bt", "margin_bt",
    "scaled_bt", "soft_label", "reg_penalty", "example_losses", "batch_objective",
]
