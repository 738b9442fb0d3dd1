"""Weighted cross-entropy and inverse-frequency class weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .layers import softmax


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights derived from class frequencies.

    Weights are strictly positive and rescaled so they sum to the class
    count, keeping the weighted loss on the same scale as the unweighted
    one.
    """

    w: np.ndarray
    f: np.ndarray
    n_classes: int

    def __post_init__(self):
        if (self.w <= 0).any():
            raise DataError("class weights must be strictly positive")


def uniform_class_weights(n_classes: int) -> ClassWeights:
    return ClassWeights(
        w=np.ones(n_classes),
        f=np.full(n_classes, 1.0 / n_classes),
        n_classes=n_classes,
    )


def class_weights_from_counts(counts) -> ClassWeights:
    """Inverse-frequency weights, rescaled so sum(w) equals the class count."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or counts.shape[0] < 1:
        raise DataError("counts must be a non-empty 1-D vector")
    if (counts <= 0).any():
        missing = int(np.nonzero(counts <= 0)[0][0])
        raise DataError(f"class {missing} has no samples; weights undefined")
    c = counts.shape[0]
    f = counts / counts.sum()
    raw = 1.0 / f
    w = raw * (c / raw.sum())
    return ClassWeights(w=w, f=f, n_classes=c)


def _weight_vector(weights, n_classes: int) -> np.ndarray:
    if weights is None:
        return np.ones(n_classes)
    if isinstance(weights, ClassWeights):
        return weights.w
    return np.asarray(weights, dtype=np.float64)


def weighted_cross_entropy(logits: np.ndarray, label: int, weights=None
                           ) -> tuple[float, np.ndarray]:
    """Loss and gradient for a single sample.

    loss = w[y] * (-x[y] + logsumexp(x)), with the log-sum-exp evaluated in
    max-shifted form. Gradient is w[y] * (softmax(x) - onehot(y)).
    """
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("weighted_cross_entropy expects a 1-D logit vector")
    c = x.shape[0]
    if not 0 <= label < c:
        raise IndexError(f"label {label} out of range for {c} classes")
    w = _weight_vector(weights, c)
    m = x.max()
    lse = m + np.log(np.exp(x - m).sum())
    loss = w[label] * (lse - x[label])
    grad = softmax(x)
    grad[label] -= 1.0
    grad *= w[label]
    return float(loss), grad


def weighted_cross_entropy_batch(logits: np.ndarray, labels: np.ndarray, weights=None
                                 ) -> tuple[float, np.ndarray]:
    """Mean per-sample weighted cross-entropy over a batch of logits (B, C)."""
    x = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    b, c = x.shape
    if labels.shape != (b,):
        raise ValueError("labels must be (B,)")
    if labels.min() < 0 or labels.max() >= c:
        raise IndexError("label out of range")
    w = _weight_vector(weights, c)
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    wy = w[labels]
    loss = (wy * (lse - x[np.arange(b), labels])).mean()
    grad = softmax(x)
    grad[np.arange(b), labels] -= 1.0
    grad *= wy[:, None] / b
    return float(loss), grad
