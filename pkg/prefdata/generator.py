"""Synthetic preference data drawn from the ordered-logit model."""
import logging
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_serializer, field_validator, model_validator
from scipy.special import expit

from config import (
    DEFAULT_K,
    DEFAULT_THRESHOLD_MODE,
    FEATURE_SCALE,
    GENERATOR_STREAM,
    SCORER_DIM,
    SCORER_HIDDEN,
)
from ordinal import ThresholdMode, Thresholds, build_thresholds, default_threshold_params
from scoring import RewardScorer, ScorerKind, init_scorer
from utils.rng import make_rng, rng_descriptor
from .dataset import PreferenceDataset

logger = logging.getLogger(__name__)


class GenConfig(BaseModel):
    """Generator settings, read from a flat JSON file.

    The true scorer is either given explicitly (scorer JSON object) or drawn
    with ``init_scorer`` from ``seed`` and multiplied by ``true_scale``. The
    true thresholds default to uniform spacing over [-K/2, K/2].
    """
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    n: int = Field(..., gt=0, description="Number of examples")
    d: int = Field(SCORER_DIM, gt=0, description="Feature dimension")
    K: int = Field(DEFAULT_K, ge=1, description="Positive levels")
    seed: int = Field(0, ge=0)
    feature_scale: float = Field(FEATURE_SCALE, gt=0)
    threshold_mode: ThresholdMode = ThresholdMode(DEFAULT_THRESHOLD_MODE)
    true_thresholds: Optional[Thresholds] = None
    true_scorer: Optional[RewardScorer] = None
    scorer_kind: ScorerKind = ScorerKind.LINEAR
    hidden: int = Field(SCORER_HIDDEN, ge=1)
    true_scale: float = Field(1.0, gt=0)

    @field_validator("true_thresholds", mode="before")
    @classmethod
    def _parse_thresholds(cls, value: Any, info: ValidationInfo) -> Any:
        if value is None or isinstance(value, Thresholds):
            return value
        if isinstance(value, dict):
            return Thresholds.from_dict(value)
        K = info.data.get("K", DEFAULT_K)
        mode = info.data.get("threshold_mode", ThresholdMode(DEFAULT_THRESHOLD_MODE))
        return Thresholds(K, mode, np.asarray(value, dtype=np.float64))

    @field_validator("true_scorer", mode="before")
    @classmethod
    def _parse_scorer(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return RewardScorer.from_dict(value)
        return value

    @model_validator(mode="after")
    def _check_shapes(self) -> "GenConfig":
        if self.true_thresholds is not None and self.true_thresholds.K != self.K:
            raise ValueError(f"true_thresholds have K={self.true_thresholds.K}, config has K={self.K}")
        if self.true_scorer is not None and self.true_scorer.d != self.d:
            raise ValueError(f"true_scorer has d={self.true_scorer.d}, config has d={self.d}")
        return self

    @field_serializer("true_thresholds")
    def _dump_thresholds(self, th: Optional[Thresholds]):
        return None if th is None else th.to_dict()

    @field_serializer("true_scorer")
    def _dump_scorer(self, sc: Optional[RewardScorer]):
        return None if sc is None else sc.to_dict()

    def scorer(self) -> RewardScorer:
        """The generating scorer."""
        if self.true_scorer is not None:
            return self.true_scorer
        base = init_scorer(self.scorer_kind, self.d, self.hidden, self.seed)
        return base.with_params(base.params * self.true_scale)

    def thresholds(self) -> Thresholds:
        """The generating thresholds."""
        if self.true_thresholds is not None:
            return self.true_thresholds
        return build_thresholds(default_threshold_params(self.K, self.threshold_mode))


def sample_levels(s: np.ndarray, th: Thresholds, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw: z = -K + #{j : u >= sigma(t_j - s)}."""
    cdf = expit(th.zeta[None, :] - s[:, None])
    return (u[:, None] >= cdf).sum(axis=1).astype(np.int64) - th.K


def generate(cfg: GenConfig) -> PreferenceDataset:
    """Draw a dataset from the generative model.

    Example i uses its own stream (seed, GENERATOR_STREAM, i): first the d
    features of a, then b, then one uniform for the label. The output does
    not depend on how examples are batched.
    """
    sc = cfg.scorer()
    th = cfg.thresholds()
    a = np.empty((cfg.n, cfg.d))
    b = np.empty((cfg.n, cfg.d))
    u = np.empty(cfg.n)
    for i in range(cfg.n):
        rng = make_rng(cfg.seed, GENERATOR_STREAM, i)
        a[i] = rng.normal(0.0, cfg.feature_scale, size=cfg.d)
        b[i] = rng.normal(0.0, cfg.feature_scale, size=cfg.d)
        u[i] = rng.random()

    s_true = sc.diff_batch(a, b)
    z = sample_levels(s_true, th, u)

    metadata = {
        "n": cfg.n,
        "d": cfg.d,
        "K": cfg.K,
        "seed": cfg.seed,
        "rng": rng_descriptor(cfg.seed),
        "noise": None,
        "feature_scale": cfg.feature_scale,
        "threshold_mode": th.mode.value,
        "true_thresholds": [float(v) for v in th.zeta],
        "true_scorer_digest": sc.digest,
    }
    counts = np.bincount(z + cfg.K, minlength=2 * cfg.K + 1)
    logger.info(f"Generated {cfg.n} examples (K={cfg.K}, d={cfg.d}); level counts {counts.tolist()}")
    return PreferenceDataset(a, b, z, cfg.K, z_clean=z.copy(), metadata=metadata)
