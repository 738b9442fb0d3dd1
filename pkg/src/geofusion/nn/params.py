"""Named parameter tensors with matching gradient slots."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


class Parameter:
    """A learnable array plus its gradient accumulator.

    `decay` marks whether weight decay applies; biases register with
    decay=False.
    """

    __slots__ = ("value", "grad", "decay")

    def __init__(self, value: np.ndarray, decay: bool = True):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.decay = decay

    @property
    def shape(self):
        return self.value.shape


class ParamStore:
    """Flat name -> Parameter mapping owned by a model.

    Names are unique; iteration is in sorted-name order so optimizer steps
    and checkpoints are reproducible.
    """

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def register(self, name: str, param: Parameter) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value for name, p in self.items()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.items():
            if name not in arrays:
                raise KeyError(f"checkpoint is missing parameter {name!r}")
            arr = np.asarray(arrays[name])
            if arr.shape != p.value.shape:
                raise DimensionError(
                    f"parameter {name!r}: checkpoint shape {arr.shape} != model shape {p.value.shape}"
                )
            p.value[...] = arr


def collect_params(layers: dict[str, object]) -> ParamStore:
    """Build a store from {prefix: layer} where each layer yields named params."""
    store = ParamStore()
    for prefix, layer in layers.items():
        for name, p in layer.params(prefix):
            store.register(name, p)
    return store
