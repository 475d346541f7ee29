"""Macro-averaged F1 and cross-fold aggregation."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def macro_f1(confusion: np.ndarray | Sequence[Sequence[float]]) -> float:
    """Unweighted mean of per-label F1 in [0, 100].

    ``confusion[i][j]`` counts items with gold label i predicted as j;
    labels with zero denominators contribute an F1 of 0.
    """
    matrix = np.asarray(confusion, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {matrix.shape}")
    if (matrix < 0).any():
        raise ValueError("confusion counts must be non-negative")
    f1_values = []
    for label in range(matrix.shape[0]):
        correct = matrix[label, label]
        gold_total = matrix[label, :].sum()
        system_total = matrix[:, label].sum()
        precision = correct / system_total if system_total else 0.0
        recall = correct / gold_total if gold_total else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        f1_values.append(f1)
    return 100.0 * sum(f1_values) / len(f1_values)


def aggregate_folds(scores: Sequence[float]) -> tuple[float, float]:
    """(arithmetic mean, population standard deviation) of fold scores."""
    if not scores:
        raise ValueError("at least one fold score is required")
    mean = sum(scores) / len(scores)
    variance = sum((s - mean) ** 2 for s in scores) / len(scores)
    return mean, math.sqrt(variance)
