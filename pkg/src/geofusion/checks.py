"""Finite-difference verification suites for every differentiable piece.

Each check builds a small random instance, scalarizes the output against
a fixed random projection, and compares the analytic gradients of all
parameters and inputs with central differences. Graph structure is built
once per instance and held fixed while differentiating, matching how the
layers themselves treat neighbour selection.
"""

from __future__ import annotations

import numpy as np

from .conv import DualNeighbourhoodConv, EdgeConditionedConv, FilterNet
from .data.cloud import PointCloud
from .fusion import FusionStage
from .graph import AttributeConfig, edge_attributes, knn_graph
from .model import ClassifierHead
from .nn.gradcheck import GradCheckReport, finite_difference_check
from .nn.layers import (
    Dropout,
    Linear,
    global_average_pool,
    global_average_pool_backward,
    relu,
    relu_backward,
    softmax,
    softmax_backward,
    tanh,
    tanh_backward,
)
from .nn.loss import class_weights_from_counts, weighted_cross_entropy
from .pooling import PoolingLayer

TOLERANCE = 1e-5


def _param_arrays(layer, prefix: str):
    arrays = {}
    grads = {}
    for name, p in layer.params(prefix):
        arrays[name] = p.value
        grads[name] = p.grad
    return arrays, grads


def _randomize_params(layer, rng: np.random.Generator) -> None:
    """Move every parameter (biases included) to a generic point.

    Production initialization leaves biases at zero, which parks the
    filter net's rectifier exactly on its kink for the all-zero self-loop
    attribute rows; central differences are ill-defined there.
    """
    for _, p in layer.params("_"):
        p.value[...] = rng.normal(scale=0.4, size=p.value.shape)


def check_linear(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    layer = Linear(4, 3, rng=rng)
    x = rng.normal(size=(5, 4))
    r = rng.normal(size=(5, 3))

    def loss():
        return float((layer.forward(x) * r).sum())

    arrays, grads = _param_arrays(layer, "linear")
    arrays["input"] = x
    for g in grads.values():
        g[...] = 0.0
    dx = layer.backward(x, r)
    analytic = {name: g for name, g in grads.items()}
    analytic["input"] = dx
    return finite_difference_check(loss, arrays, analytic, tolerance=TOLERANCE)


def _check_activation(seed: int, fwd, bwd, through_output: bool) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(6, 3))
    r = rng.normal(size=(6, 3))

    def loss():
        return float((fwd(x) * r).sum())

    out = fwd(x)
    analytic = bwd(out if through_output else x, r)
    return finite_difference_check(loss, {"input": x}, {"input": analytic}, tolerance=TOLERANCE)


def check_relu(seed: int) -> GradCheckReport:
    return _check_activation(seed, relu, relu_backward, through_output=False)


def check_tanh(seed: int) -> GradCheckReport:
    return _check_activation(seed, tanh, tanh_backward, through_output=True)


def check_softmax(seed: int) -> GradCheckReport:
    return _check_activation(seed, softmax, softmax_backward, through_output=True)


def check_dropout(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    layer = Dropout(0.2)
    x = rng.normal(size=(8, 4))
    r = rng.normal(size=(8, 4))

    def loss():
        out, _ = layer.forward(x, np.random.default_rng(seed + 1), train=True)
        return float((out * r).sum())

    _, mask = layer.forward(x, np.random.default_rng(seed + 1), train=True)
    analytic = layer.backward(r, mask)
    return finite_difference_check(loss, {"input": x}, {"input": analytic}, tolerance=TOLERANCE)


def check_weighted_cross_entropy(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    c = 4
    x = rng.normal(size=c)
    weights = class_weights_from_counts(rng.integers(1, 20, size=c))
    label = int(rng.integers(c))

    def loss():
        value, _ = weighted_cross_entropy(x, label, weights)
        return value

    _, grad = weighted_cross_entropy(x, label, weights)
    return finite_difference_check(loss, {"logits": x}, {"logits": grad}, tolerance=TOLERANCE)


def check_global_average_pool(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(7, 3))
    batch = np.array([0, 0, 1, 1, 1, 2, 2])
    r = rng.normal(size=(3, 3))

    def loss():
        return float((global_average_pool(x, batch) * r).sum())

    analytic = global_average_pool_backward(r, batch)
    return finite_difference_check(loss, {"input": x}, {"input": analytic}, tolerance=TOLERANCE)


def check_filter_net(seed: int, clamp: bool = True) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    net = FilterNet(attr_dim=5, d_in=3, d_out=2, hidden=8, clamp=clamp, rng=rng)
    attrs = rng.normal(size=(6, 5))
    r = rng.normal(size=(6, 2, 3))

    def loss():
        theta, _ = net.forward(attrs)
        return float((theta * r).sum())

    arrays, grads = _param_arrays(net, "fnet")
    arrays["attrs"] = attrs
    for g in grads.values():
        g[...] = 0.0
    _, cache = net.forward(attrs)
    dattrs = net.backward(cache, r)
    analytic = dict(grads)
    analytic["attrs"] = dattrs
    return finite_difference_check(loss, arrays, analytic, tolerance=TOLERANCE)


def check_edge_conditioned_conv(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    n, k, d_in, d_out = 10, 3, 3, 2
    positions = rng.normal(size=(n, 3))
    x = rng.normal(size=(n, d_in))
    config = AttributeConfig(positional="cartesian", feature="none")
    graph = knn_graph(positions, k)
    attrs = edge_attributes(graph, positions, None if config.feature == "none" else x, config)
    layer = EdgeConditionedConv(d_in, d_out, attrs.values.shape[1], hidden=8, rng=rng)
    _randomize_params(layer, rng)
    r = rng.normal(size=(n, d_out))

    def loss():
        out, _ = layer.forward(graph, attrs.values, x)
        return float((out * r).sum())

    arrays, grads = _param_arrays(layer, "conv")
    arrays["input"] = x
    for g in grads.values():
        g[...] = 0.0
    _, cache = layer.forward(graph, attrs.values, x)
    _, dx = layer.backward(cache, r)
    analytic = dict(grads)
    analytic["input"] = dx
    return finite_difference_check(loss, arrays, analytic, tolerance=TOLERANCE)


def check_dual_conv(seed: int, aggregation: str = "average") -> GradCheckReport:
    n, k, d_in, d_out = 16, 4, 3, 2
    attempt = 0
    while True:
        rng = np.random.default_rng((seed, attempt))
        positions = rng.normal(size=(n, 3))
        x = rng.normal(size=(n, d_in))
        layer = DualNeighbourhoodConv(
            d_in, d_out, k, AttributeConfig("spherical", "offset"),
            aggregation=aggregation, hidden=8, rng=rng,
        )
        _randomize_params(layer, rng)
        graphs = layer.build_graphs(positions, x)
        if aggregation == "maximum":
            # keep the check away from aggregation kinks
            out_e, _ = layer.euclid.forward(
                graphs[0], edge_attributes(graphs[0], positions, x, layer.attr_config).values, x)
            out_f, _ = layer.feature.forward(
                graphs[1], edge_attributes(graphs[1], positions, x, layer.attr_config).values, x)
            if np.abs(out_e - out_f).min() < 1e-3:
                attempt += 1
                continue
        break
    r = rng.normal(size=(n, d_out))

    def loss():
        out, _ = layer.forward(positions, x, graphs=graphs)
        return float((out * r).sum())

    arrays, grads = _param_arrays(layer, "dual")
    arrays["input"] = x
    for g in grads.values():
        g[...] = 0.0
    _, cache = layer.forward(positions, x, graphs=graphs)
    dx = layer.backward(cache, r)
    analytic = dict(grads)
    analytic["input"] = dx
    return finite_difference_check(loss, arrays, analytic, tolerance=TOLERANCE)


def check_pooling(seed: int, aggr: str) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    n = 12
    cloud = PointCloud(positions=rng.normal(size=(n, 3)), features=rng.normal(size=(n, 3)))
    layer = PoolingLayer(r=1.0, aggr=aggr)
    pooled, cache = layer.forward(cloud)
    r = rng.normal(size=pooled.features.shape)

    def loss():
        out, _ = layer.forward(cloud)
        return float((out.features * r).sum())

    analytic = layer.backward(cache, r)
    return finite_difference_check(
        loss, {"features": cloud.features}, {"features": analytic}, tolerance=TOLERANCE
    )


def check_fusion_stage(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    n_geom, n_tex = 8, 6
    geom = PointCloud(positions=rng.normal(size=(n_geom, 3)),
                      features=rng.normal(size=(n_geom, 3)))
    tex = PointCloud(positions=rng.normal(size=(n_tex, 3)),
                     features=rng.normal(size=(n_tex, 2)))
    stage = FusionStage(d_geom=3, d_tex=2, d_fused=2, r=0.8, rng=rng)
    fused, cache = stage.forward(geom, tex)
    r = rng.normal(size=fused.features.shape)

    def loss():
        out, _ = stage.forward(geom, tex)
        return float((out.features * r).sum())

    arrays, grads = _param_arrays(stage, "fusion")
    arrays["geom"] = geom.features
    arrays["tex"] = tex.features
    for g in grads.values():
        g[...] = 0.0
    d_geom_in, d_tex_in = stage.backward(cache, r)
    analytic = dict(grads)
    analytic["geom"] = d_geom_in
    analytic["tex"] = d_tex_in
    return finite_difference_check(loss, arrays, analytic, tolerance=TOLERANCE)


def check_classifier_head(seed: int) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    head = ClassifierHead(feat_dim=4, n_classes=3, dropout_p=0.2, rng=rng)
    x = rng.normal(size=(9, 4))
    batch = np.array([0, 0, 0, 1, 1, 2, 2, 2, 2])
    r = rng.normal(size=(3, 3))

    def loss():
        logits, _ = head.forward(x, batch, rng=np.random.default_rng(seed + 5), train=True)
        return float((logits * r).sum())

    arrays, grads = _param_arrays(head, "head")
    arrays["input"] = x
    for g in grads.values():
        g[...] = 0.0
    _, cache = head.forward(x, batch, rng=np.random.default_rng(seed + 5), train=True)
    dx = head.backward(cache, r)
    analytic = dict(grads)
    analytic["input"] = dx
    return finite_difference_check(loss, arrays, analytic, tolerance=TOLERANCE)


CHECKS = {
    "linear": check_linear,
    "relu": check_relu,
    "tanh": check_tanh,
    "softmax": check_softmax,
    "dropout": check_dropout,
    "weighted_cross_entropy": check_weighted_cross_entropy,
    "global_average_pool": check_global_average_pool,
    "filter_net": check_filter_net,
    "edge_conditioned_conv": check_edge_conditioned_conv,
    "dual_conv_average": lambda seed: check_dual_conv(seed, "average"),
    "dual_conv_maximum": lambda seed: check_dual_conv(seed, "maximum"),
    "pooling_average": lambda seed: check_pooling(seed, "average"),
    "pooling_maximum": lambda seed: check_pooling(seed, "maximum"),
    "fusion_stage": check_fusion_stage,
    "classifier_head": check_classifier_head,
}


def run_all_checks(n_seeds: int = 20, base_seed: int = 0) -> dict[str, float]:
    """Worst relative error per check over n_seeds random instances."""
    worst: dict[str, float] = {}
    for name, fn in CHECKS.items():
        errs = [fn(base_seed + s).max_rel_error for s in range(n_seeds)]
        worst[name] = max(errs)
    return worst
