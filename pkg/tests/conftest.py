import json

import numpy as np
import pytest

from ordinal import Thresholds, ThresholdMode, predict_level
from prefdata import GenConfig, PreferenceDataset, generate
from scoring import RewardScorer, ScorerKind

TRUE_ZETA = [-2.0, -1.2, -0.4, 0.4, 1.2, 2.0]


@pytest.fixture
def th_k1():
    return Thresholds(1, ThresholdMode.SYMMETRIC, [-1.0, 1.0])


@pytest.fixture
def th_k2():
    return Thresholds(2, ThresholdMode.SYMMETRIC, [-2.0, -1.0, 1.0, 2.0])


def linear_scorer(weights, bias=0.0) -> RewardScorer:
    w = np.asarray(weights, dtype=np.float64)
    return RewardScorer(ScorerKind.LINEAR, w.size, 0, np.append(w, bias))


def synthetic(n: int, seed: int = 0, d: int = 4, K: int = 3, **kwargs) -> PreferenceDataset:
    """Ordered-logit data from the generator with the fixture thresholds."""
    cfg = GenConfig(n=n, d=d, K=K, seed=seed, **kwargs)
    return generate(cfg)


def separable(n: int, seed: int = 0, d: int = 4) -> tuple[PreferenceDataset, RewardScorer, Thresholds]:
    """Labels assigned deterministically by the true scorer and thresholds."""
    truth = linear_scorer(np.linspace(1.0, -0.5, d))
    th = Thresholds(3, ThresholdMode.SYMMETRIC, TRUE_ZETA)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, d))
    b = rng.normal(size=(n, d))
    z = predict_level(truth.diff_batch(a, b), th)
    return PreferenceDataset(a, b, z, 3), truth, th


def write_config(path, data: dict):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)
