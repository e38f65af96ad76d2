"""Optimizers and learning-rate schedules on flat numpy parameter vectors."""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS


class OptimizerKind(Enum):
    """Update rule."""
    SGD = "sgd"
    ADAM = "adam"


class Schedule(Enum):
    """Learning-rate schedule shape."""
    COSINE_WARMUP = "cosine_warmup"
    CONSTANT = "constant"


@dataclass
class AdamMoments:
    """First and second moment estimates."""
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "AdamMoments":
        return cls(np.zeros(size), np.zeros(size))


def adam_step(
    moments: AdamMoments,
    grad: np.ndarray,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
    t: int = 1,
) -> tuple[np.ndarray, AdamMoments]:
    """One bias-corrected Adam update.

    Args:
        moments: Moments before this step
        grad: Gradient at the current parameters
        lr: Learning rate for this step
        t: 1-based step number used for bias correction

    Returns:
        (delta to add to the parameters, updated moments)
    """
    if t < 1:
        raise ValueError(f"Adam step number must be >= 1, got {t}")
    grad = np.asarray(grad, dtype=np.float64)
    m = beta1 * moments.m + (1.0 - beta1) * grad
    v = beta2 * moments.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    delta = -lr * m_hat / (np.sqrt(v_hat) + eps)
    return delta, AdamMoments(m, v)


def cosine_warmup_lr(step: int, total: int, warmup_frac: float, base_lr: float) -> float:
    """Linear warmup to ``base_lr`` then half-cosine decay to 0 at ``total``."""
    if not 0 <= step <= total:
        raise ValueError(f"step must be in [0, {total}], got {step}")
    if total == 0:
        return base_lr
    warmup = warmup_frac * total
    if step < warmup:
        return base_lr * step / warmup
    if warmup >= total:
        return base_lr
    progress = (step - warmup) / (total - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def scheduled_lr(schedule: Schedule, step: int, total: int, warmup_frac: float, base_lr: float) -> float:
    if schedule is Schedule.CONSTANT:
        return base_lr
    return cosine_warmup_lr(step, total, warmup_frac, base_lr)


@dataclass
class ParamOptimizer:
    """Stateful SGD or Adam over one parameter vector."""
    kind: OptimizerKind
    size: int
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    t: int = 0
    moments: AdamMoments = field(init=False)

    def __post_init__(self):
        self.moments = AdamMoments.zeros(self.size)

    def delta(self, grad: np.ndarray, lr: float) -> np.ndarray:
        """Parameter change for ``grad``; advances the step counter."""
        self.t += 1
        if self.kind is OptimizerKind.SGD:
            return -lr * np.asarray(grad, dtype=np.float64)
        delta, self.moments = adam_step(self.moments, grad, lr, self.beta1, self.beta2, self.eps, self.t)
        return delta
