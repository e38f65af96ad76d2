"""Reward scorers."""
from .reward_scorer import (
    ScorerKind,
    RewardScorer,
    param_count,
    score,
    score_diff,
    backprop_score_diff,
    init_scorer,
)

__all__ = ["ScorerKind", "RewardScorer", "param_count", "score", "score_diff", "backprop_score_diff", "init_scorer"]
