"""Optimizers, schedules and the joint trainer."""
from .optim import OptimizerKind, Schedule, AdamMoments, ParamOptimizer, adam_step, cosine_warmup_lr, scheduled_lr
from .trainer import (
    ThresholdOpt,
    TrainConfig,
    TrainState,
    TrainReport,
    Checkpoint,
    full_objective,
    init_state,
    projected_step,
    select_checkpoint,
    train,
)

__all__ = [
    "OptimizerKind", "Schedule", "AdamMoments", "ParamOptimizer", "adam_step", "cosine_warmup_lr", "scheduled_lr",
    "ThresholdOpt", "TrainConfig", "TrainState", "TrainReport", "Checkpoint", "full_objective", "init_state",
    "projected_step", "select_checkpoint", "train",
]
