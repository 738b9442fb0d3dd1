"""Confusion matrix and mean class accuracy (unweighted mean of recalls)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    confusion: np.ndarray  # rows: true class, columns: predicted class

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum())

    @property
    def per_class_recall(self) -> np.ndarray:
        totals = self.confusion.sum(axis=1)
        diag = np.diag(self.confusion).astype(np.float64)
        return np.divide(diag, totals, out=np.zeros_like(diag), where=totals > 0)

    @property
    def mean_class_accuracy(self) -> float:
        return float(self.per_class_recall.mean())

    @property
    def overall_accuracy(self) -> float:
        return float(np.diag(self.confusion).sum() / max(1, self.n_samples))

    def __str__(self) -> str:
        return (
            f"mean class accuracy {self.mean_class_accuracy:.4f} "
            f"(overall {self.overall_accuracy:.4f}, n={self.n_samples})"
        )


def metrics_from_predictions(labels, predictions, n_classes: int) -> MetricsReport:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions must align")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    return MetricsReport(confusion=confusion)
