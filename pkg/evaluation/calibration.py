"""Post-hoc threshold calibration against a frozen scorer."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from config import CALIBRATION_EPOCHS, CALIBRATION_LR, CALIBRATION_MIN_GAP
from errors import DimensionError, LevelError, SchemaError
from ordinal import (
    LossKind,
    LossSpec,
    ThresholdMode,
    Thresholds,
    backprop_thresholds,
    batch_objective,
    build_thresholds,
    example_losses,
    params_from_thresholds,
    project_ordered,
)
from training.optim import OptimizerKind, ParamOptimizer

logger = logging.getLogger(__name__)

_NLL = LossSpec(LossKind.ORDINAL_NLL)


@dataclass
class CalibrationResult:
    """Fitted thresholds plus fit diagnostics."""
    thresholds: Thresholds
    objective: float
    objective_history: list[float] = field(default_factory=list)
    best_epoch: int = 0
    epochs: int = CALIBRATION_EPOCHS
    lr: float = CALIBRATION_LR
    low_information: bool = False

    def to_dict(self) -> dict:
        return {
            **self.thresholds.to_dict(),
            "objective": self.objective,
            "initial_objective": self.objective_history[0] if self.objective_history else None,
            "best_epoch": self.best_epoch,
            "epochs": self.epochs,
            "lr": self.lr,
            "low_information": self.low_information,
        }


def _warm_start(diffs: np.ndarray, labels: np.ndarray, K: int) -> np.ndarray:
    """Per-threshold solution of mean sigma(t_j - s_i) = F_j.

    F_j is the empirical probability of a level at or below rank j, clipped
    away from 0 and 1.
    """
    n = diffs.size
    rank = labels + K + 1
    cdf = np.array([(rank <= j).mean() for j in range(1, 2 * K + 1)])
    cdf = np.clip(cdf, 0.5 / n, 1.0 - 0.5 / n)
    lo_d, hi_d = float(diffs.min()), float(diffs.max())
    start = np.empty(2 * K)
    for j, F in enumerate(cdf):
        offset = float(logit(F))
        if hi_d == lo_d:
            start[j] = lo_d + offset
            continue
        start[j] = brentq(lambda t: expit(t - diffs).mean() - F, lo_d + offset - 1.0, hi_d + offset + 1.0)
    return project_ordered(start, CALIBRATION_MIN_GAP)


def calibrate(
    diffs: np.ndarray,
    labels: np.ndarray,
    K: int,
    epochs: int = CALIBRATION_EPOCHS,
    lr: float = CALIBRATION_LR,
) -> CalibrationResult:
    """Fit asymmetric thresholds to frozen score differences.

    Full-batch Adam on the mean ordinal NLL from a moment-matching warm
    start. The lowest-objective iterate is returned.
    """
    diffs = np.asarray(diffs, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if diffs.shape != labels.shape:
        raise DimensionError(f"{diffs.size} score differences but {labels.size} labels")
    if diffs.size < 2 * K + 1:
        raise SchemaError(f"Calibration needs at least {2 * K + 1} examples, got {diffs.size}")
    if np.any(np.abs(labels) > K):
        raise LevelError(f"Labels must lie in {{-{K}..{K}}}")
    if not np.all(np.isfinite(diffs)):
        raise SchemaError("Score differences must be finite")

    low_information = bool(np.ptp(diffs) == 0.0)
    if low_information:
        logger.warning("All score differences are equal; calibrated thresholds carry no ranking information")

    start = Thresholds(K, ThresholdMode.ASYMMETRIC, _warm_start(diffs, labels, K))
    params = params_from_thresholds(start)
    opt = ParamOptimizer(OptimizerKind.ADAM, params.alpha.size)

    history = []
    best = (np.inf, params, 0)
    for epoch in range(epochs + 1):
        th = build_thresholds(params)
        objective, _, g_zeta = batch_objective(example_losses(_NLL, diffs, labels, th, K))
        history.append(objective)
        if objective < best[0]:
            best = (objective, params, epoch)
        if epoch == epochs:
            break
        grad = backprop_thresholds(params, g_zeta)
        params = params.with_alpha(params.alpha + opt.delta(grad, lr))

    objective, params, best_epoch = best
    logger.info(f"Calibrated {2 * K} thresholds on {diffs.size} pairs: NLL {history[0]:.5f} -> {objective:.5f}")
    return CalibrationResult(
        thresholds=build_thresholds(params),
        objective=float(objective),
        objective_history=history,
        best_epoch=best_epoch,
        epochs=epochs,
        lr=lr,
        low_information=low_information,
    )


def posthoc_calibrate(
    diffs: np.ndarray,
    labels: np.ndarray,
    K: int,
    epochs: int = CALIBRATION_EPOCHS,
    lr: float = CALIBRATION_LR,
) -> Thresholds:
    """Thresholds for a frozen scorer; see :func:`calibrate`."""
    return calibrate(diffs, labels, K, epochs, lr).thresholds
