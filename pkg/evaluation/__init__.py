"""Evaluation metrics and post-hoc calibration."""
from .metrics import (
    BinaryResult,
    MarginStats,
    OrdinalMetrics,
    MetricsReport,
    binary_accuracy,
    binary_from_diffs,
    binary_report,
    binary_report_from_diffs,
    error_margins,
    margins_from_diffs,
    ordinal_metrics,
    ordinal_metrics_from_predictions,
    mae_from_confusion,
    confusion_rows,
    histogram_rows,
    format_report,
)
from .calibration import CalibrationResult, calibrate, posthoc_calibrate

__all__ = [
    "BinaryResult", "MarginStats", "OrdinalMetrics", "MetricsReport",
    "binary_accuracy", "binary_from_diffs", "binary_report", "binary_report_from_diffs",
    "error_margins", "margins_from_diffs", "ordinal_metrics", "ordinal_metrics_from_predictions",
    "mae_from_confusion", "confusion_rows", "histogram_rows", "format_report",
    "CalibrationResult", "calibrate", "posthoc_calibrate",
]
