"""SGD with classic momentum and decoupled-from-momentum weight decay."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class SGDMomentum:
    """v <- mu*v + g + wd*theta (decay only on params flagged for it);
    theta <- theta - lr*v.

    Velocity buffers are created lazily and shape-match their parameters.
    """

    def __init__(self, lr: float = 1e-3, momentum: float = 0.9,
                 weight_decay: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocities: dict[str, np.ndarray] = {}

    def step(self, store: ParamStore) -> None:
        for name, p in store.items():
            v = self.velocities.get(name)
            if v is None:
                v = self.velocities[name] = np.zeros_like(p.value)
            g = p.grad
            if self.weight_decay != 0.0 and p.decay:
                g = g + self.weight_decay * p.value
            v *= self.momentum
            v += g
            p.value -= self.lr * v


def sgd_momentum_step(params: ParamStore, state: SGDMomentum) -> None:
    """Apply one optimizer step in place."""
    state.step(params)
