"""Binary and ordinal evaluation metrics.

Conventions:
    - binary accuracy counts pairs with z != 0 only; a score difference of
      exactly 0 is a tie and counts as incorrect
    - an error is a pair whose oriented score difference is negative; its
      margin is r(rejected) - r(chosen) > 0 (ties are not errors)
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from config import ACC_WITHIN_LEVELS, MARGIN_BIN_WIDTH
from errors import DimensionError, LevelError, UndefinedMetricError
from ordinal import Thresholds, predict_level
from prefdata import PreferenceDataset
from scoring import RewardScorer

logger = logging.getLogger(__name__)


@dataclass
class BinaryResult:
    """Pairwise ranking accuracy over non-tied labels."""
    accuracy: float
    correct: int
    incorrect: int
    ties: int
    excluded: int
    degenerate: bool


@dataclass
class MarginStats:
    """Magnitude of ranking violations."""
    margins: list[float]
    count: int
    mean: Optional[float]
    max: Optional[float]
    histogram: list[dict]
    correct: int
    ties: int
    excluded: int

    def to_dict(self, include_margins: bool = True) -> dict:
        out = asdict(self)
        if not include_margins:
            out.pop("margins")
        return out


@dataclass
class OrdinalMetrics:
    """Level-prediction quality."""
    mae: Optional[float]
    acc_within: dict[int, Optional[float]]
    confusion: np.ndarray


@dataclass
class MetricsReport:
    """Everything ``eval`` reports for one scorer on one dataset."""
    n_pairs: int
    binary: Optional[BinaryResult]
    margins: MarginStats
    ordinal: Optional[OrdinalMetrics] = None
    extra: dict = field(default_factory=dict)

    @property
    def binary_accuracy(self) -> Optional[float]:
        return None if self.binary is None else self.binary.accuracy

    @property
    def mae(self) -> Optional[float]:
        return None if self.ordinal is None else self.ordinal.mae

    @property
    def acc_within(self) -> Optional[dict]:
        return None if self.ordinal is None else self.ordinal.acc_within

    def to_dict(self) -> dict:
        out = {
            "n_pairs": self.n_pairs,
            "binary_accuracy": self.binary_accuracy,
            "binary": None if self.binary is None else asdict(self.binary),
            "error_margins": self.margins.to_dict(),
        }
        if self.ordinal is not None:
            out["mae"] = self.ordinal.mae
            out["acc_within"] = {str(k): v for k, v in self.ordinal.acc_within.items()}
            out["confusion"] = self.ordinal.confusion.tolist()
        out.update(self.extra)
        return out


def _oriented(s: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s, dtype=np.float64)
    z = np.asarray(z, dtype=np.int64)
    if s.shape != z.shape:
        raise DimensionError(f"Score and label shapes differ: {s.shape} vs {z.shape}")
    nonzero = z != 0
    return np.sign(z[nonzero]) * s[nonzero], nonzero


def binary_from_diffs(s: np.ndarray, z: np.ndarray) -> BinaryResult:
    """Binary accuracy from score differences and signed labels."""
    oriented, nonzero = _oriented(s, z)
    excluded = int((~nonzero).sum())
    if oriented.size == 0:
        raise UndefinedMetricError("Binary accuracy is undefined: every pair is tied (z=0)")
    correct = int((oriented > 0).sum())
    ties = int((oriented == 0).sum())
    incorrect = int(oriented.size - correct)
    degenerate = ties == oriented.size
    if degenerate:
        logger.warning("Every score difference is exactly 0; binary accuracy is degenerate")
    return BinaryResult(correct / oriented.size, correct, incorrect, ties, excluded, degenerate)


def binary_accuracy(scorer: RewardScorer, ds: PreferenceDataset) -> float:
    """Fraction of non-tied pairs where the preferred response scores higher."""
    return binary_from_diffs(scorer.diff_batch(ds.a, ds.b), ds.z).accuracy


def margins_from_diffs(s: np.ndarray, z: np.ndarray, bin_width: float = MARGIN_BIN_WIDTH) -> MarginStats:
    """Error margins from score differences and signed labels."""
    oriented, nonzero = _oriented(s, z)
    errors = oriented < 0
    margins = -oriented[errors]
    count = int(margins.size)
    histogram = []
    if count:
        bins = np.floor(margins / bin_width).astype(np.int64)
        counts = np.bincount(bins)
        histogram = [
            {"lo": i * bin_width, "hi": (i + 1) * bin_width, "count": int(c)}
            for i, c in enumerate(counts)
        ]
    return MarginStats(
        margins=[float(m) for m in margins],
        count=count,
        mean=float(margins.mean()) if count else None,
        max=float(margins.max()) if count else None,
        histogram=histogram,
        correct=int((oriented > 0).sum()),
        ties=int((oriented == 0).sum()),
        excluded=int((~nonzero).sum()),
    )


def error_margins(scorer: RewardScorer, ds: PreferenceDataset) -> MarginStats:
    """Ranking violations of ``scorer`` on ``ds``."""
    return margins_from_diffs(scorer.diff_batch(ds.a, ds.b), ds.z)


def ordinal_metrics_from_predictions(pred: np.ndarray, labels: np.ndarray, K: int) -> OrdinalMetrics:
    """MAE, Acc@k and the (true x predicted) confusion matrix."""
    pred = np.asarray(pred, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if pred.shape != labels.shape:
        raise DimensionError(f"Prediction and label shapes differ: {pred.shape} vs {labels.shape}")
    if np.any(np.abs(pred) > K) or np.any(np.abs(labels) > K):
        raise LevelError(f"Levels must lie in {{-{K}..{K}}}")
    size = 2 * K + 1
    confusion = np.zeros((size, size), dtype=np.int64)
    np.add.at(confusion, (labels + K, pred + K), 1)
    n = labels.size
    if n == 0:
        return OrdinalMetrics(None, {k: None for k in ACC_WITHIN_LEVELS}, confusion)
    abs_err = np.abs(pred - labels)
    acc_within = {k: float((abs_err <= k).sum() / n) for k in ACC_WITHIN_LEVELS}
    return OrdinalMetrics(float(abs_err.sum() / n), acc_within, confusion)


def mae_from_confusion(confusion: np.ndarray) -> Optional[float]:
    """MAE recomputed from a confusion matrix."""
    n = int(confusion.sum())
    if n == 0:
        return None
    i, j = np.indices(confusion.shape)
    return float((confusion * np.abs(i - j)).sum() / n)


def ordinal_metrics(scorer: RewardScorer, th: Thresholds, ds: PreferenceDataset) -> MetricsReport:
    """Full report: binary accuracy, level metrics and error margins."""
    if th.K != ds.K:
        raise LevelError(f"Thresholds have K={th.K}, dataset has K={ds.K}")
    s = scorer.diff_batch(ds.a, ds.b) if ds.n else np.zeros(0)
    report = binary_report_from_diffs(s, ds.z)
    pred = predict_level(s, th) if ds.n else np.zeros(0, dtype=np.int64)
    report.ordinal = ordinal_metrics_from_predictions(pred, ds.z, ds.K)
    return report


def binary_report_from_diffs(s: np.ndarray, z: np.ndarray) -> MetricsReport:
    """Report without level metrics (scorers trained without thresholds)."""
    try:
        binary = binary_from_diffs(s, z)
    except UndefinedMetricError as e:
        logger.warning(str(e))
        binary = None
    return MetricsReport(n_pairs=int(np.asarray(z).size), binary=binary, margins=margins_from_diffs(s, z))


def binary_report(scorer: RewardScorer, ds: PreferenceDataset) -> MetricsReport:
    s = scorer.diff_batch(ds.a, ds.b) if ds.n else np.zeros(0)
    return binary_report_from_diffs(s, ds.z)


def confusion_rows(confusion: np.ndarray, K: int) -> tuple[list[str], list[list]]:
    """CSV header and rows for a confusion matrix."""
    levels = list(range(-K, K + 1))
    header = ["true_level"] + [f"pred_{k}" for k in levels]
    rows = [[level] + [int(c) for c in confusion[i]] for i, level in enumerate(levels)]
    return header, rows


def histogram_rows(stats: MarginStats) -> tuple[list[str], list[list]]:
    """CSV header and rows for the margin histogram."""
    return ["bin_lo", "bin_hi", "count"], [[float(b["lo"]), float(b["hi"]), b["count"]] for b in stats.histogram]


def format_report(report: MetricsReport) -> str:
    """Plain-text summary table."""
    def fmt(v):
        return "n/a" if v is None else f"{v:.4f}"

    lines = [f"{'metric':<20}{'value':>12}", "-" * 32, f"{'pairs':<20}{report.n_pairs:>12}"]
    lines.append(f"{'binary_accuracy':<20}{fmt(report.binary_accuracy):>12}")
    if report.binary is not None:
        lines.append(f"{'excluded_ties':<20}{report.binary.excluded:>12}")
    if report.ordinal is not None:
        lines.append(f"{'mae':<20}{fmt(report.ordinal.mae):>12}")
        for k, v in report.ordinal.acc_within.items():
            lines.append(f"{f'acc@{k}':<20}{fmt(v):>12}")
    lines.append(f"{'error_count':<20}{report.margins.count:>12}")
    lines.append(f"{'error_margin_mean':<20}{fmt(report.margins.mean):>12}")
    lines.append(f"{'error_margin_max':<20}{fmt(report.margins.max):>12}")
    return "\n".join(lines)
