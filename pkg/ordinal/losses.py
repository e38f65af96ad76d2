"""Per-example losses with analytic gradients.

Every loss is a function of the score difference s (and, for the ordinal
family, the thresholds). Batch kernels work on arrays; the scalar operations
wrap them. All values are evaluated in log space so no input produces NaN.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import expit, log_expit

from config import MARGIN_TABLE, SCALED_TABLE, SOFT_LABEL_BASE, SOFT_LABEL_SPAN, SOFT_LABEL_TABLE
from errors import ContractError, DimensionError, LevelError, SchemaError
from .thresholds import Thresholds, interval_bounds

logger = logging.getLogger(__name__)


class LossKind(Enum):
    """Available training losses."""
    SIMPLE_BT = "simple_bt"
    MARGIN_BT = "margin_bt"
    SCALED_BT = "scaled_bt"
    SOFT_LABEL = "soft_label"
    ORDINAL_NLL = "ordinal_nll"
    ORDINAL_AT = "ordinal_at"
    ORDINAL_IT = "ordinal_it"

    @property
    def is_ordinal(self) -> bool:
        """Whether the loss learns thresholds."""
        return self in (LossKind.ORDINAL_NLL, LossKind.ORDINAL_AT, LossKind.ORDINAL_IT)

    @property
    def skips_ties(self) -> bool:
        """Whether z=0 pairs are dropped (no preferred response exists)."""
        return self in (LossKind.SIMPLE_BT, LossKind.MARGIN_BT, LossKind.SCALED_BT)


def _table(values: Optional[Sequence[float]], K: int, default: np.ndarray, name: str) -> np.ndarray:
    if values is None:
        return default
    table = np.asarray(values, dtype=np.float64)
    if table.shape != (K,):
        raise DimensionError(f"{name} needs one entry per strength 1..{K}, got {len(table)}")
    if not np.all(np.isfinite(table)):
        raise SchemaError(f"{name} entries must be finite")
    return table


@dataclass(frozen=True)
class LossSpec:
    """Loss choice plus the strength tables the BT baselines use.

    Tables are indexed by strength |z| = 1..K. ``None`` derives the table
    from K (see ``config.py``).
    """
    kind: LossKind
    margin_table: Optional[tuple[float, ...]] = MARGIN_TABLE
    weight_table: Optional[tuple[float, ...]] = SCALED_TABLE
    prob_table: Optional[tuple[float, ...]] = SOFT_LABEL_TABLE

    def __post_init__(self):
        if not isinstance(self.kind, LossKind):
            object.__setattr__(self, "kind", LossKind(str(self.kind).lower()))
        for name in ("margin_table", "weight_table", "prob_table"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(v) for v in value))

    def margins(self, K: int) -> np.ndarray:
        return _table(self.margin_table, K, np.arange(1, K + 1, dtype=np.float64), "margin_table")

    def weights(self, K: int) -> np.ndarray:
        table = _table(self.weight_table, K, np.arange(1, K + 1, dtype=np.float64), "weight_table")
        if np.any(table < 0):
            raise SchemaError("weight_table entries must be non-negative")
        return table

    def probs(self, K: int) -> np.ndarray:
        default = SOFT_LABEL_BASE + SOFT_LABEL_SPAN * np.arange(1, K + 1) / K
        table = _table(self.prob_table, K, default, "prob_table")
        if np.any(table <= 0) or np.any(table > 1):
            raise SchemaError("prob_table entries must lie in (0, 1]")
        return table


@dataclass
class LossValueGrad:
    """Loss value and gradients for a single example."""
    value: float
    d_s: float
    d_zeta: np.ndarray


@dataclass
class BatchLoss:
    """Per-example losses for a batch.

    Rows with ``kept`` False are skipped pairs and hold zeros.
    """
    value: np.ndarray
    d_s: np.ndarray
    d_zeta: np.ndarray
    kept: np.ndarray

    @property
    def n_kept(self) -> int:
        return int(self.kept.sum())

    def row(self, i: int) -> LossValueGrad:
        return LossValueGrad(float(self.value[i]), float(self.d_s[i]), self.d_zeta[i].copy())


def log_sigmoid(t: ArrayLike) -> Union[float, np.ndarray]:
    """Stable log(sigmoid(t)) = -softplus(-t)."""
    out = log_expit(np.asarray(t, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def _check_levels(z: np.ndarray, K: int) -> None:
    if np.any(np.abs(z) > K):
        bad = int(z[np.abs(z) > K].ravel()[0])
        raise LevelError(f"Level {bad} outside {{-{K}..{K}}}")


# Ordinal family

def _log_prob(s: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # sigma(a) - sigma(b) = sigma(a) sigma(-b) (1 - exp(b - a)) with a = hi - s, b = lo - s
    return log_expit(hi - s) + log_expit(s - lo) + np.log(-np.expm1(lo - hi))


def _nll_batch(s: np.ndarray, z: np.ndarray, th: Thresholds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo, hi = interval_bounds(z, th)
    log_p = _log_prob(s, lo, hi)
    a = hi - s
    b = lo - s
    # sigma'(t) = sigma(t) sigma(-t); zero at infinite bounds
    d_hi = -np.exp(log_expit(a) + log_expit(-a) - log_p)
    d_lo = np.exp(log_expit(b) + log_expit(-b) - log_p)
    d_s = -(d_hi + d_lo)

    n = s.shape[0]
    rows = np.arange(n)
    rank = z.astype(np.int64) + th.K + 1
    d_zeta = np.zeros((n, 2 * th.K))
    has_hi = rank <= 2 * th.K
    has_lo = rank >= 2
    d_zeta[rows[has_hi], rank[has_hi] - 1] = d_hi[has_hi]
    d_zeta[rows[has_lo], rank[has_lo] - 2] = d_lo[has_lo]
    return -log_p, d_s, d_zeta


def _at_batch(s: np.ndarray, z: np.ndarray, th: Thresholds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    K = th.K
    j = np.arange(2 * K)
    # nu_j = -1 for thresholds below the target interval, +1 at or above it
    nu = np.where(j[None, :] < (z[:, None] + K), -1.0, 1.0)
    u = nu * (th.zeta[None, :] - s[:, None])
    value = -log_expit(u).sum(axis=1)
    weight = expit(-u) * nu
    return value, weight.sum(axis=1), -weight


def _it_batch(s: np.ndarray, z: np.ndarray, th: Thresholds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo, hi = interval_bounds(z, th)
    # infinite bounds contribute log_expit(inf) = 0 and expit(-inf) = 0
    value = -log_expit(s - lo) - log_expit(hi - s)
    d_lo = expit(lo - s)
    d_hi = -expit(s - hi)
    d_s = -(d_lo + d_hi)

    n = s.shape[0]
    rows = np.arange(n)
    rank = z.astype(np.int64) + th.K + 1
    d_zeta = np.zeros((n, 2 * th.K))
    has_hi = rank <= 2 * th.K
    has_lo = rank >= 2
    d_zeta[rows[has_hi], rank[has_hi] - 1] = d_hi[has_hi]
    d_zeta[rows[has_lo], rank[has_lo] - 2] = d_lo[has_lo]
    return value, d_s, d_zeta


# Bradley-Terry family; z is signed, sign(z) gives the orientation

def _bt_batch(s: np.ndarray, z: np.ndarray, offset: np.ndarray, weight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sign = np.sign(z).astype(np.float64)
    arg = sign * s - offset
    value = -weight * log_expit(arg)
    d_s = -weight * sign * expit(-arg)
    return value, d_s


def _soft_label_batch(s: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    value = -p * log_expit(s) - (1.0 - p) * log_expit(-s)
    return value, expit(s) - p


def signed_soft_labels(z: ArrayLike, probs: np.ndarray) -> np.ndarray:
    """p(z) on signed levels: p(-k) = 1 - p(k), p(0) = 0.5."""
    z = np.asarray(z, dtype=np.int64)
    strength = np.abs(z)
    p_pos = np.where(strength > 0, probs[np.maximum(strength, 1) - 1], 0.5)
    return np.where(z < 0, 1.0 - p_pos, p_pos)


def example_losses(
    spec: LossSpec,
    s: ArrayLike,
    z: ArrayLike,
    th: Optional[Thresholds],
    K: int,
) -> BatchLoss:
    """Evaluate ``spec`` over a batch of score differences.

    Args:
        spec: Loss choice and tables
        s: Score differences, shape (n,)
        z: Signed levels, shape (n,)
        th: Current thresholds (required for ordinal losses)
        K: Number of positive levels

    Returns:
        BatchLoss with per-example rows; BT pairs with z=0 are not kept
    """
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    if s.shape != z.shape:
        raise DimensionError(f"Score and label shapes differ: {s.shape} vs {z.shape}")
    _check_levels(z, K)
    n = s.shape[0]
    kept = np.ones(n, dtype=bool)

    kind = spec.kind
    if kind.is_ordinal:
        if th is None:
            raise ContractError(f"{kind.value} needs thresholds")
        if th.K != K:
            raise SchemaError(f"Thresholds have K={th.K}, labels use K={K}")
        kernel = {LossKind.ORDINAL_NLL: _nll_batch, LossKind.ORDINAL_AT: _at_batch, LossKind.ORDINAL_IT: _it_batch}[kind]
        value, d_s, d_zeta = kernel(s, z, th)
        return BatchLoss(value, d_s, d_zeta, kept)

    d_zeta = np.zeros((n, 2 * K))
    if kind is LossKind.SOFT_LABEL:
        value, d_s = _soft_label_batch(s, signed_soft_labels(z, spec.probs(K)))
        return BatchLoss(value, d_s, d_zeta, kept)

    kept = z != 0
    strength = np.maximum(np.abs(z), 1) - 1
    offset = np.zeros(n)
    weight = np.ones(n)
    if kind is LossKind.MARGIN_BT:
        offset = spec.margins(K)[strength]
    elif kind is LossKind.SCALED_BT:
        weight = spec.weights(K)[strength]
    value, d_s = _bt_batch(s, z, offset, weight)
    value = np.where(kept, value, 0.0)
    d_s = np.where(kept, d_s, 0.0)
    return BatchLoss(value, d_s, d_zeta, kept)


def batch_objective(batch: BatchLoss) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean loss over kept examples with matching gradient weights.

    Returns:
        (mean value, per-example d_s weights, summed d_zeta), all already
        divided by the number of kept examples
    """
    n_kept = batch.n_kept
    if n_kept == 0:
        return 0.0, np.zeros_like(batch.d_s), np.zeros(batch.d_zeta.shape[1])
    scale = 1.0 / n_kept
    return float(batch.value.sum() * scale), batch.d_s * scale, batch.d_zeta.sum(axis=0) * scale


def _single(kernel, s: float, th: Thresholds, z: int) -> LossValueGrad:
    z_arr = np.array([int(z)])
    _check_levels(z_arr, th.K)
    value, d_s, d_zeta = kernel(np.array([float(s)]), z_arr, th)
    return LossValueGrad(float(value[0]), float(d_s[0]), d_zeta[0])


def log_prob_level(s: float, th: Thresholds, z: int) -> float:
    """log P(level z | s) under the ordered-logit model."""
    lo, hi = interval_bounds(np.array([int(z)]), th)
    return float(_log_prob(np.array([float(s)]), lo, hi)[0])


def prob_level(s: float, th: Thresholds, z: int) -> float:
    """P(level z | s) = sigma(hi - s) - sigma(lo - s)."""
    return float(np.exp(log_prob_level(s, th, z)))


def ordinal_nll(s: float, th: Thresholds, z: int) -> LossValueGrad:
    """Negative log-likelihood of level ``z``."""
    return _single(_nll_batch, s, th, z)


def ordinal_at(s: float, th: Thresholds, z: int) -> LossValueGrad:
    """All-threshold loss: a logistic penalty at every cut-point."""
    return _single(_at_batch, s, th, z)


def ordinal_it(s: float, th: Thresholds, z: int) -> LossValueGrad:
    """Immediate-threshold loss: penalties at the two bounds of level ``z``."""
    return _single(_it_batch, s, th, z)


def _bt_single(s: float, sign: float, offset: float, weight: float, K: Optional[int]) -> LossValueGrad:
    value, d_s = _bt_batch(np.array([float(s)]), np.array([sign]), np.array([offset]), np.array([weight]))
    return LossValueGrad(float(value[0]), float(d_s[0]), np.zeros(2 * K if K else 0))


def _strength(z: int, table: Sequence[float], name: str) -> int:
    if z == 0:
        raise ContractError(f"{name} is undefined for tied pairs (z=0)")
    k = abs(int(z))
    if k > len(table):
        raise LevelError(f"No {name} table entry for strength {k}")
    return k


def simple_bt(s: float, z_sign: int, K: Optional[int] = None) -> LossValueGrad:
    """Bradley-Terry loss -log sigma(z_sign * s)."""
    if z_sign not in (1, -1):
        raise ContractError(f"z_sign must be +1 or -1, got {z_sign}")
    return _bt_single(s, z_sign, 0.0, 1.0, K)


def margin_bt(s: float, z: int, table: Sequence[float], K: Optional[int] = None) -> LossValueGrad:
    """BT loss with a strength-dependent margin: -log sigma(s - m(z))."""
    k = _strength(z, table, "margin_bt")
    return _bt_single(s, np.sign(z), float(table[k - 1]), 1.0, K)


def scaled_bt(s: float, z: int, table: Sequence[float], K: Optional[int] = None) -> LossValueGrad:
    """BT loss scaled by strength: -m(z) log sigma(s)."""
    k = _strength(z, table, "scaled_bt")
    if table[k - 1] < 0:
        raise SchemaError("scaled_bt weights must be non-negative")
    return _bt_single(s, np.sign(z), 0.0, float(table[k - 1]), K)


def soft_label(s: float, z: int, table: Sequence[float], K: Optional[int] = None) -> LossValueGrad:
    """Binary cross-entropy against the soft target p(z)."""
    if abs(int(z)) > len(table):
        raise LevelError(f"No soft-label entry for strength {abs(int(z))}")
    p = signed_soft_labels(np.array([int(z)]), np.asarray(table, dtype=np.float64))
    value, d_s = _soft_label_batch(np.array([float(s)]), p)
    return LossValueGrad(float(value[0]), float(d_s[0]), np.zeros(2 * K if K else 0))


def reg_penalty(th: Thresholds, lam: float) -> tuple[float, np.ndarray]:
    """lambda * ||zeta||^2 and its gradient."""
    if lam < 0:
        raise SchemaError(f"lambda must be non-negative, got {lam}")
    zeta = th.zeta
    return float(lam * np.dot(zeta, zeta)), 2.0 * lam * zeta
