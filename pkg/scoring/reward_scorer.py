"""Toy reward scorers with analytic gradients.

A scorer maps a response's feature vector to a scalar reward. Training only
ever sees the reward difference s = r(a) - r(b).

Parameter layouts (flat vector):
    linear: w (d), b (1)
    mlp:    W (h*d, row-major), c (h), head (h), b (1)
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from config import INIT_STREAM, SCORER_DIM, SCORER_HIDDEN
from errors import DimensionError, SchemaError
from utils.artifacts import digest_json
from utils.rng import make_rng

logger = logging.getLogger(__name__)


class ScorerKind(Enum):
    """Scorer architecture."""
    LINEAR = "linear"
    MLP = "mlp"


def param_count(kind: ScorerKind, d: int, h: int) -> int:
    """Number of parameters for a scorer shape."""
    if kind is ScorerKind.LINEAR:
        return d + 1
    return d * h + h + h + 1


@dataclass(frozen=True)
class RewardScorer:
    """Immutable scorer; training builds a new one per update."""
    kind: ScorerKind
    d: int
    h: int
    params: np.ndarray

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, ScorerKind) else ScorerKind(str(self.kind).lower())
        params = np.array(self.params, dtype=np.float64)
        if self.d < 1:
            raise SchemaError(f"Feature dimension must be >= 1, got {self.d}")
        if kind is ScorerKind.MLP and self.h < 1:
            raise SchemaError(f"Hidden width must be >= 1, got {self.h}")
        expected = param_count(kind, self.d, self.h)
        if params.shape != (expected,):
            raise DimensionError(
                f"{kind.value} scorer with d={self.d}, h={self.h} needs {expected} parameters, got {params.size}"
            )
        if not np.all(np.isfinite(params)):
            raise SchemaError("Scorer parameters must be finite")
        params.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)

    @property
    def bias(self) -> float:
        return float(self.params[-1])

    def unpack(self) -> dict[str, np.ndarray]:
        """Views of the named parameter blocks."""
        p = self.params
        if self.kind is ScorerKind.LINEAR:
            return {"w": p[: self.d], "b": p[-1:]}
        d, h = self.d, self.h
        return {
            "W": p[: d * h].reshape(h, d),
            "c": p[d * h: d * h + h],
            "head": p[d * h + h: d * h + 2 * h],
            "b": p[-1:],
        }

    def with_params(self, params: np.ndarray) -> "RewardScorer":
        return RewardScorer(self.kind, self.d, self.h, params)

    def _features(self, f: ArrayLike) -> np.ndarray:
        F = np.asarray(f, dtype=np.float64)
        if F.shape[-1] != self.d:
            raise DimensionError(f"Scorer expects {self.d} features, got {F.shape[-1]}")
        return F

    def _hidden(self, F: np.ndarray) -> np.ndarray:
        blocks = self.unpack()
        return np.tanh(np.einsum("nd,hd->nh", F, blocks["W"]) + blocks["c"])

    def score_batch(self, F: ArrayLike) -> np.ndarray:
        """Rewards for rows of ``F`` (shape (n, d)).

        einsum keeps each row's reduction order independent of n, so batched
        and one-at-a-time scoring agree bit for bit.
        """
        F = np.atleast_2d(self._features(F))
        blocks = self.unpack()
        if self.kind is ScorerKind.LINEAR:
            return np.einsum("nd,d->n", F, blocks["w"]) + blocks["b"][0]
        return np.einsum("nh,h->n", self._hidden(F), blocks["head"]) + blocks["b"][0]

    def diff_batch(self, A: ArrayLike, B: ArrayLike) -> np.ndarray:
        """Score differences r(a_i) - r(b_i)."""
        A = np.atleast_2d(self._features(A))
        B = np.atleast_2d(self._features(B))
        if A.shape != B.shape:
            raise DimensionError(f"Response feature shapes differ: {A.shape} vs {B.shape}")
        return self.score_batch(A) - self.score_batch(B)

    def backprop_batch(self, A: ArrayLike, B: ArrayLike, upstream: ArrayLike) -> np.ndarray:
        """Sum over i of upstream_i * d s_i / d params."""
        A = np.atleast_2d(self._features(A))
        B = np.atleast_2d(self._features(B))
        g = np.atleast_1d(np.asarray(upstream, dtype=np.float64))
        if A.shape != B.shape or g.shape != (A.shape[0],):
            raise DimensionError(f"Shapes disagree: a {A.shape}, b {B.shape}, upstream {g.shape}")
        grad = np.zeros_like(self.params)
        if self.kind is ScorerKind.LINEAR:
            grad[: self.d] = g @ (A - B)
            return grad

        d, h = self.d, self.h
        head = self.unpack()["head"]
        H_a = self._hidden(A)
        H_b = self._hidden(B)
        delta_a = g[:, None] * head * (1.0 - H_a ** 2)
        delta_b = g[:, None] * head * (1.0 - H_b ** 2)
        grad[: d * h] = (delta_a.T @ A - delta_b.T @ B).ravel()
        grad[d * h: d * h + h] = delta_a.sum(axis=0) - delta_b.sum(axis=0)
        grad[d * h + h: d * h + 2 * h] = g @ (H_a - H_b)
        # bias cancels in the difference
        return grad

    @property
    def digest(self) -> str:
        return digest_json(self.to_dict())

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "d": self.d, "h": self.h, "params": [float(v) for v in self.params]}

    @classmethod
    def from_dict(cls, data: dict) -> "RewardScorer":
        try:
            return cls(
                kind=ScorerKind(str(data["kind"]).lower()),
                d=int(data["d"]),
                h=int(data.get("h", 0)),
                params=np.asarray(data["params"], dtype=np.float64),
            )
        except KeyError as e:
            raise SchemaError(f"Scorer file missing field {e}") from None
        except (TypeError, ValueError) as e:
            if isinstance(e, SchemaError):
                raise
            raise SchemaError(f"Invalid scorer file: {e}") from None


def score(sc: RewardScorer, f: ArrayLike) -> float:
    """Reward of a single response."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise DimensionError(f"Expected one feature vector, got shape {f.shape}")
    return float(sc.score_batch(f[None, :])[0])


def score_diff(sc: RewardScorer, fy: ArrayLike, fy2: ArrayLike) -> float:
    """s = r(fy) - r(fy2)."""
    return score(sc, fy) - score(sc, fy2)


def backprop_score_diff(sc: RewardScorer, fy: ArrayLike, fy2: ArrayLike, upstream: float) -> np.ndarray:
    """upstream * d score_diff / d params for one pair."""
    fy = np.asarray(fy, dtype=np.float64)
    fy2 = np.asarray(fy2, dtype=np.float64)
    return sc.backprop_batch(fy[None, :], fy2[None, :], np.array([float(upstream)]))


def init_scorer(
    kind: Union[str, ScorerKind] = "linear",
    d: int = SCORER_DIM,
    h: int = SCORER_HIDDEN,
    seed: int = 0,
) -> RewardScorer:
    """Seeded initialization: weights ~ N(0, 1/fan_in), biases 0."""
    kind = kind if isinstance(kind, ScorerKind) else ScorerKind(str(kind).lower())
    rng = make_rng(seed, INIT_STREAM)
    if kind is ScorerKind.LINEAR:
        params = np.concatenate((rng.normal(0.0, np.sqrt(1.0 / d), size=d), [0.0]))
        return RewardScorer(kind, d, 0, params)
    W = rng.normal(0.0, np.sqrt(1.0 / d), size=h * d)
    head = rng.normal(0.0, np.sqrt(1.0 / h), size=h)
    params = np.concatenate((W, np.zeros(h), head, [0.0]))
    logger.debug(f"Initialized mlp scorer d={d} h={h} seed={seed}")
    return RewardScorer(kind, d, h, params)
