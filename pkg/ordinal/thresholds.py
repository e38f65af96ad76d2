"""Ordered cut-points on the reward-difference line.

Levels run over {-K..K}. The 2K thresholds are stored in sorted order
t_1 < ... < t_2K, which logically are zeta_{-K} .. zeta_{-1}, zeta_1 .. zeta_K
(there is no zeta_0). Level z owns the half-open interval [t_{r-1}, t_r) with
rank r = z + K + 1 and implicit sentinels t_0 = -inf, t_{2K+1} = +inf.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import isotonic_regression

from config import MIN_THRESHOLD_GAP
from errors import DimensionError, LevelError, SchemaError

logger = logging.getLogger(__name__)


class ThresholdMode(Enum):
    """Threshold symmetry constraint."""
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


def as_mode(mode: Union[str, ThresholdMode]) -> ThresholdMode:
    """Accept either the enum or its string value."""
    return mode if isinstance(mode, ThresholdMode) else ThresholdMode(str(mode).lower())


@dataclass(frozen=True)
class Thresholds:
    """Validated, sorted threshold vector."""
    K: int
    mode: ThresholdMode
    zeta: np.ndarray

    def __post_init__(self):
        zeta = np.array(self.zeta, dtype=np.float64)
        if self.K < 1:
            raise SchemaError(f"K must be >= 1, got {self.K}")
        if zeta.shape != (2 * self.K,):
            raise DimensionError(f"Expected {2 * self.K} thresholds for K={self.K}, got shape {zeta.shape}")
        if not np.all(np.isfinite(zeta)):
            raise SchemaError("Thresholds must be finite")
        if np.any(np.diff(zeta) <= 0):
            raise SchemaError(f"Thresholds must be strictly increasing: {zeta.tolist()}")
        mode = as_mode(self.mode)
        if mode is ThresholdMode.SYMMETRIC and not np.array_equal(zeta[: self.K], -zeta[::-1][: self.K]):
            raise SchemaError("Symmetric thresholds must satisfy zeta_{-k} = -zeta_k")
        zeta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "mode", mode)

    @property
    def padded(self) -> np.ndarray:
        """Thresholds with the -inf/+inf sentinels: index r gives t_r."""
        return np.concatenate(([-np.inf], self.zeta, [np.inf]))

    def logical(self, k: int) -> float:
        """Return zeta_k for k in {-K..-1, 1..K}."""
        if k == 0 or abs(k) > self.K:
            raise LevelError(f"No threshold zeta_{k} for K={self.K}")
        return float(self.zeta[k + self.K if k < 0 else k + self.K - 1])

    def scaled(self, c: float) -> "Thresholds":
        """The thresholds multiplied by a positive constant."""
        if c <= 0:
            raise ValueError(f"Scale must be positive, got {c}")
        return Thresholds(self.K, self.mode, c * self.zeta)

    def to_dict(self) -> dict:
        return {"K": self.K, "mode": self.mode.value, "zeta": [float(v) for v in self.zeta]}

    @classmethod
    def from_dict(cls, data: dict) -> "Thresholds":
        try:
            return cls(K=int(data["K"]), mode=as_mode(data["mode"]), zeta=np.asarray(data["zeta"], dtype=np.float64))
        except KeyError as e:
            raise SchemaError(f"Threshold file missing field {e}") from None
        except ValueError as e:
            if isinstance(e, SchemaError):
                raise
            raise SchemaError(f"Invalid threshold file: {e}") from None


@dataclass(frozen=True)
class ThresholdParams:
    """Unconstrained parameterization of the thresholds.

    Symmetric: K values, zeta_1 = exp(a_1), zeta_k = zeta_{k-1} + exp(a_k).
    Asymmetric: 2K values, t_1 = a_0 and t_j = t_{j-1} + exp(a_{j-1}).
    """
    K: int
    mode: ThresholdMode
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mode", as_mode(self.mode))
        object.__setattr__(self, "alpha", np.array(self.alpha, dtype=np.float64))

    @property
    def expected_length(self) -> int:
        return self.K if self.mode is ThresholdMode.SYMMETRIC else 2 * self.K

    def with_alpha(self, alpha: np.ndarray) -> "ThresholdParams":
        return ThresholdParams(self.K, self.mode, alpha)


def _check_alpha(params: ThresholdParams) -> None:
    if params.alpha.shape != (params.expected_length,):
        raise DimensionError(
            f"{params.mode.value} thresholds with K={params.K} need {params.expected_length} "
            f"parameters, got shape {params.alpha.shape}"
        )


def _increments(alpha: np.ndarray) -> np.ndarray:
    return np.maximum(np.exp(alpha), MIN_THRESHOLD_GAP)


def _increment_grad(alpha: np.ndarray) -> np.ndarray:
    # flat below the floor
    e = np.exp(alpha)
    return np.where(e > MIN_THRESHOLD_GAP, e, 0.0)


def build_thresholds(params: ThresholdParams) -> Thresholds:
    """Map unconstrained parameters to ordered thresholds."""
    _check_alpha(params)
    alpha = params.alpha
    if params.mode is ThresholdMode.SYMMETRIC:
        positive = np.cumsum(_increments(alpha))
        zeta = np.concatenate((-positive[::-1], positive))
    else:
        zeta = alpha[0] + np.concatenate(([0.0], np.cumsum(_increments(alpha[1:]))))
    return Thresholds(params.K, params.mode, zeta)


def backprop_thresholds(params: ThresholdParams, grad_zeta: ArrayLike) -> np.ndarray:
    """Chain rule from d/dzeta (sorted order) to d/dalpha.

    Args:
        params: Parameters the thresholds were built from
        grad_zeta: Gradient over the 2K sorted thresholds

    Returns:
        Gradient with the shape of ``params.alpha``
    """
    _check_alpha(params)
    g = np.asarray(grad_zeta, dtype=np.float64)
    K = params.K
    if g.shape != (2 * K,):
        raise DimensionError(f"Expected gradient over {2 * K} thresholds, got shape {g.shape}")
    alpha = params.alpha
    if params.mode is ThresholdMode.SYMMETRIC:
        # zeta_{-k} = -zeta_k folds the negative half onto the positive one
        h = g[K:] - g[:K][::-1]
        tail = np.cumsum(h[::-1])[::-1]
        return _increment_grad(alpha) * tail
    tail = np.cumsum(g[::-1])[::-1]
    grad = np.empty_like(alpha)
    grad[0] = tail[0]
    grad[1:] = _increment_grad(alpha[1:]) * tail[1:]
    return grad


def params_from_thresholds(th: Thresholds) -> ThresholdParams:
    """Inverse of :func:`build_thresholds`."""
    if th.mode is ThresholdMode.SYMMETRIC:
        positive = th.zeta[th.K:]
        alpha = np.log(np.diff(np.concatenate(([0.0], positive))))
    else:
        alpha = np.concatenate(([th.zeta[0]], np.log(np.diff(th.zeta))))
    return ThresholdParams(th.K, th.mode, alpha)


def default_threshold_params(K: int, mode: Union[str, ThresholdMode]) -> ThresholdParams:
    """Parameters for thresholds uniformly spaced over [-K/2, K/2]."""
    mode = as_mode(mode)
    zeta = np.linspace(-K / 2.0, K / 2.0, 2 * K)
    if mode is ThresholdMode.SYMMETRIC:
        zeta = np.concatenate((-zeta[K:][::-1], zeta[K:]))
    return params_from_thresholds(Thresholds(K, mode, zeta))


def _rank(z: np.ndarray, K: int) -> np.ndarray:
    z = np.asarray(z)
    if np.any(np.abs(z) > K):
        bad = z[np.abs(z) > K].ravel()[0]
        raise LevelError(f"Level {int(bad)} outside {{-{K}..{K}}}")
    return z.astype(np.int64) + K + 1


def interval_bounds(z: ArrayLike, th: Thresholds) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`interval_of` returning (lo, hi) arrays."""
    rank = _rank(np.asarray(z), th.K)
    padded = th.padded
    return padded[rank - 1], padded[rank]


def interval_of(z: int, th: Thresholds) -> tuple[float, float]:
    """Interval [lo, hi) of latent scores assigned to level ``z``."""
    lo, hi = interval_bounds(np.asarray(int(z)), th)
    return float(lo), float(hi)


def predict_level(s: ArrayLike, th: Thresholds) -> Union[int, np.ndarray]:
    """Level whose interval contains ``s``; scores on a threshold go up."""
    s_arr = np.asarray(s, dtype=np.float64)
    levels = np.searchsorted(th.zeta, s_arr, side="right") - th.K
    if levels.ndim == 0:
        return int(levels)
    return levels.astype(np.int64)


def project_ordered(raw: ArrayLike, eps: float) -> np.ndarray:
    """Euclidean projection onto {v : v_{j+1} >= v_j + eps}.

    Shifting u_j = v_j - j*eps turns the spacing constraint into plain
    monotonicity, which pool-adjacent-violators solves exactly.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"Expected a vector, got shape {v.shape}")
    if v.size <= 1 or np.all(np.diff(v) >= eps):
        return v.copy()
    offsets = eps * np.arange(v.size)
    fitted = isotonic_regression(v - offsets, increasing=True).x
    return fitted + offsets


def project_thresholds(raw: ArrayLike, eps: float) -> Thresholds:
    """Project a raw 2K vector onto eps-separated asymmetric thresholds."""
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 1 or v.size == 0 or v.size % 2:
        raise DimensionError(f"Expected an even-length threshold vector, got shape {v.shape}")
    return Thresholds(v.size // 2, ThresholdMode.ASYMMETRIC, project_ordered(v, eps))


def project_symmetric(raw_positive: ArrayLike, eps: float) -> Thresholds:
    """Project positive-half thresholds, keeping exact mirror symmetry.

    The projection of a mirror-symmetric point onto the (mirror-invariant)
    eps-separated set is itself symmetric; re-mirroring only removes rounding.
    """
    p = np.asarray(raw_positive, dtype=np.float64)
    K = p.size
    full = project_ordered(np.concatenate((-p[::-1], p)), eps)
    positive = 0.5 * (full[K:] - full[:K][::-1])
    return Thresholds(K, ThresholdMode.SYMMETRIC, np.concatenate((-positive[::-1], positive)))
