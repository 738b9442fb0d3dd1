"""Minimal differentiable core: layers, loss, optimizer, verification."""

from .params import Parameter, ParamStore, collect_params
from .layers import (
    Linear,
    Dropout,
    relu,
    relu_backward,
    tanh,
    tanh_backward,
    softmax,
    softmax_backward,
    global_average_pool,
    global_average_pool_backward,
    uniform_init,
)
from .loss import (
    ClassWeights,
    class_weights_from_counts,
    uniform_class_weights,
    weighted_cross_entropy,
    weighted_cross_entropy_batch,
)
from .optim import SGDMomentum, sgd_momentum_step
from .gradcheck import GradCheckReport, finite_difference_check
from .checkpoint import read_container, write_container

__all__ = [
    "Parameter",
    "ParamStore",
    "collect_params",
    "Linear",
    "Dropout",
    "relu",
    "relu_backward",
    "tanh",
    "tanh_backward",
    "softmax",
    "softmax_backward",
    "global_average_pool",
    "global_average_pool_backward",
    "uniform_init",
    "ClassWeights",
    "class_weights_from_counts",
    "uniform_class_weights",
    "weighted_cross_entropy",
    "weighted_cross_entropy_batch",
    "SGDMomentum",
    "sgd_momentum_step",
    "GradCheckReport",
    "finite_difference_check",
    "read_container",
    "write_container",
]
