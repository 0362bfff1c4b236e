"""Confusion matrices, error rate, and class-average Jaccard score."""

from __future__ import annotations

import numpy as np


def confusion_matrix(y_true, y_pred, k: int) -> np.ndarray:
    """k x k counts; rows are true classes, columns predictions."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    if y_true.size and not (
        0 <= y_true.min() and y_true.max() < k and 0 <= y_pred.min() and y_pred.max() < k
    ):
        raise ValueError(f"labels outside [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def error_rate(cm: np.ndarray) -> float:
    """Misclassification percentage: 100 * (1 - trace / total)."""
    total = cm.sum()
    if total < 1:
        raise ValueError("empty confusion matrix")
    return 100.0 * (1.0 - np.trace(cm) / total)


def jaccard_class_average(cm: np.ndarray) -> float:
    """Mean over classes of 100 * tp / (tp + fp + fn).

    A class absent from both truth and predictions scores 100 (vacuously
    perfect), keeping the average defined for every matrix.
    """
    k = cm.shape[0]
    if k < 2:
        raise ValueError("need at least two classes")
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = tp + fp + fn
    with np.errstate(invalid="ignore"):
        scores = np.where(denom > 0, 100.0 * tp / np.where(denom > 0, denom, 1.0), 100.0)
    return float(scores.mean())


def metrics_csv_rows(cm: np.ndarray) -> list:
    """(metric, value) rows for CSV emission."""
    return [
        ("error_rate_percent", error_rate(cm)),
        ("jaccard_class_average_percent", jaccard_class_average(cm)),
    ]
