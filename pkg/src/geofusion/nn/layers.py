"""Dense layers, activations, dropout, and pooling reductions.

Every differentiable op comes as a forward plus an explicit analytic
backward; there is no tape. Backwards take whatever forward context they
need as arguments and return the gradient w.r.t. their input, accumulating
parameter gradients in place.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .params import Parameter


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform in +-1/sqrt(fan_in)."""
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Linear:
    """y = x @ W.T (+ b). Weights are (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, bias: bool = True,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Parameter(uniform_init(rng, (out_dim, in_dim), in_dim))
        self.bias = Parameter(np.zeros(out_dim), decay=False) if bias else None

    @property
    def has_bias(self) -> bool:
        return self.bias is not None

    def params(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        if self.bias is not None:
            yield f"{prefix}.bias", self.bias

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(
                f"linear expects (N, {self.in_dim}), got {x.shape}"
            )
        out = x @ self.weight.value.T
        if self.bias is not None:
            out += self.bias.value
        return out

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        if grad_out.shape != (x.shape[0], self.out_dim):
            raise DimensionError(
                f"linear backward expects grad (N, {self.out_dim}), got {grad_out.shape}"
            )
        self.weight.grad += grad_out.T @ x
        if self.bias is not None:
            self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0.0)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # derivative expressed through the forward output
    return grad_out * (1.0 - out * out)


def softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise stabilized softmax; 1-D input is treated as a single row."""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    dot = (grad_out * out).sum(axis=-1, keepdims=True)
    return out * (grad_out - dot)


class Dropout:
    """Inverted-scaling dropout: train output has expectation equal to input."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p

    def forward(self, x: np.ndarray, rng: np.random.Generator | None = None,
                train: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
        if not train or self.p == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in train mode needs an rng")
        mask = rng.random(x.shape) >= self.p
        return x * mask / (1.0 - self.p), mask

    def backward(self, grad_out: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
        if mask is None:
            return grad_out
        return grad_out * mask / (1.0 - self.p)


def global_average_pool(features: np.ndarray, batch: np.ndarray,
                        n_samples: int | None = None) -> np.ndarray:
    """Per-sample mean over node features.

    batch[i] gives the sample index of node i; every sample in [0, B) must
    own at least one node.
    """
    features = np.asarray(features, dtype=np.float64)
    batch = np.asarray(batch, dtype=np.int64)
    if features.ndim != 2 or batch.shape != (features.shape[0],):
        raise DimensionError("global_average_pool expects (N, F) features and (N,) batch")
    b = int(batch.max()) + 1 if n_samples is None else n_samples
    counts = np.bincount(batch, minlength=b)
    if (counts == 0).any():
        empty = int(np.nonzero(counts == 0)[0][0])
        raise DimensionError(f"sample {empty} has no nodes")
    sums = np.zeros((b, features.shape[1]))
    np.add.at(sums, batch, features)
    return sums / counts[:, None]


def global_average_pool_backward(grad_out: np.ndarray, batch: np.ndarray) -> np.ndarray:
    counts = np.bincount(batch, minlength=grad_out.shape[0])
    return grad_out[batch] / counts[batch][:, None]
