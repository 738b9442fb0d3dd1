"""Learnable graph convolutions.

`EdgeConditionedConv` averages per-edge filtered neighbour features, where
each edge's filter matrix is emitted by a small fully connected net
conditioned on the edge's attribute vector. `DualNeighbourhoodConv` runs
one such convolution over a position-space kNN graph and another over a
feature-space kNN graph and merges the two per node.

Backward passes are analytic. Neighbour selection is treated as a
constant of the forward pass; attribute *values* (which depend on the
node features) are differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import kernels
from .errors import DimensionError, NumericCheckError
from .graph import (
    AttributeConfig,
    EdgeAttributes,
    NeighbourhoodGraph,
    edge_attributes,
    edge_attributes_backward,
    knn_graph,
    radius_graph,
)
from .nn.layers import Linear, relu, relu_backward
from .nn.params import Parameter


class FilterNet:
    """Maps an edge attribute vector to a (d_out, d_in) filter matrix.

    Two fully connected layers with a rectifier between them; when `clamp`
    is set a tanh squashes every emitted weight into [-1, 1], which keeps
    the convolution from amplifying features without bound.
    """

    FILTER_INIT_GAIN = 0.9

    def __init__(self, attr_dim: int, d_in: int, d_out: int, hidden: int = 128,
                 clamp: bool = True, rng: np.random.Generator | None = None):
        self.attr_dim = attr_dim
        self.d_in = d_in
        self.d_out = d_out
        self.clamp = clamp
        self.hidden = Linear(attr_dim, hidden, rng=rng)
        self.out = Linear(hidden, d_out * d_in, rng=rng)
        # Start every edge filter near a fixed channel-tiling map of gain
        # FILTER_INIT_GAIN, so a stack of layers begins as local mean
        # aggregation plus a learned residual. A zero start makes the
        # emitted filters (and hence the features) shrink multiplicatively
        # with depth and the stack never trains.
        tile = np.zeros((d_out, d_in))
        rows = np.arange(d_out)
        tile[rows, rows % d_in] = 1.0
        gain = np.arctanh(self.FILTER_INIT_GAIN) if clamp else self.FILTER_INIT_GAIN
        self.out.bias.value[:] = gain * tile.reshape(-1)

    def params(self, prefix: str):
        yield from self.hidden.params(f"{prefix}.hidden")
        yield from self.out.params(f"{prefix}.out")

    def forward(self, attr_values: np.ndarray) -> tuple[np.ndarray, dict]:
        if attr_values.shape[1] != self.attr_dim:
            raise DimensionError(
                f"filter net expects attribute width {self.attr_dim}, got {attr_values.shape[1]}"
            )
        pre = self.hidden.forward(attr_values)
        act = relu(pre)
        flat = self.out.forward(act)
        theta = np.tanh(flat) if self.clamp else flat
        if self.clamp and theta.size and np.abs(theta).max() > 1.0:
            raise NumericCheckError("clamped filter weights escaped [-1, 1]")
        cache = {"attrs": attr_values, "pre": pre, "act": act, "theta_flat": theta}
        return theta.reshape(-1, self.d_out, self.d_in), cache

    def backward(self, cache: dict, grad_theta: np.ndarray) -> np.ndarray:
        g = grad_theta.reshape(grad_theta.shape[0], -1)
        if self.clamp:
            t = cache["theta_flat"]
            g = g * (1.0 - t * t)
        g_act = self.out.backward(cache["act"], g)
        g_pre = relu_backward(cache["pre"], g_act)
        return self.hidden.backward(cache["attrs"], g_pre)


class EdgeConditionedConv:
    """Graph convolution: mean over incoming edges of filter(attrs) @ X_src,
    plus a learnable bias."""

    def __init__(self, d_in: int, d_out: int, attr_dim: int, hidden: int = 128,
                 clamp: bool = True, rng: np.random.Generator | None = None):
        self.d_in = d_in
        self.d_out = d_out
        self.filter_net = FilterNet(attr_dim, d_in, d_out, hidden=hidden, clamp=clamp, rng=rng)
        self.bias = Parameter(np.zeros(d_out), decay=False)

    def params(self, prefix: str):
        yield from self.filter_net.params(f"{prefix}.filter")
        yield f"{prefix}.bias", self.bias

    def forward(self, graph: NeighbourhoodGraph, attr_values: np.ndarray,
                x: np.ndarray) -> tuple[np.ndarray, dict]:
        if x.shape != (graph.n_nodes, self.d_in):
            raise DimensionError(
                f"expected features ({graph.n_nodes}, {self.d_in}), got {x.shape}"
            )
        if (graph.degrees == 0).any():
            isolated = int(np.nonzero(graph.degrees == 0)[0][0])
            raise DimensionError(f"node {isolated} has no incoming edges")
        theta, fcache = self.filter_net.forward(attr_values)
        xsrc = x[graph.src]
        out = kernels.edge_conv_forward(theta, xsrc, graph.ptr) + self.bias.value
        cache = {"graph": graph, "theta": theta, "xsrc": xsrc, "filter": fcache}
        return out, cache

    def backward(self, cache: dict, grad_out: np.ndarray
                 ) -> tuple[np.ndarray, np.ndarray]:
        """Returns (grad wrt attribute values, grad wrt node features via the
        message path). Attribute-to-feature routing is the caller's job."""
        graph: NeighbourhoodGraph = cache["graph"]
        self.bias.grad += grad_out.sum(axis=0)
        dtheta, dx = kernels.edge_conv_backward(
            cache["theta"], cache["xsrc"], graph.src, graph.ptr,
            np.ascontiguousarray(grad_out), graph.n_nodes,
        )
        dattrs = self.filter_net.backward(cache["filter"], dtheta)
        return dattrs, dx


def agc_forward(layer: EdgeConditionedConv, graph: NeighbourhoodGraph,
                attrs: EdgeAttributes, x: np.ndarray) -> np.ndarray:
    """Single-neighbourhood convolution without keeping backward state."""
    out, _ = layer.forward(graph, attrs.values, x)
    return out


AGGREGATIONS = ("average", "maximum")


class DualNeighbourhoodConv:
    """Convolution over both a Euclidean and a feature-space neighbourhood.

    Builds a kNN graph on positions and another on the input features
    (self-loops included), computes each graph's edge attributes with the
    shared config, applies an independent EdgeConditionedConv per graph,
    and merges the two outputs per node by elementwise average or maximum.
    The Euclidean side may instead use a radius policy.
    """

    def __init__(self, d_in: int, d_out: int, k: int,
                 attr_config: AttributeConfig | None = None,
                 aggregation: str = "average", hidden: int = 128,
                 clamp: bool = True, euclid_radius: float | None = None,
                 rng: np.random.Generator | None = None):
        if aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        self.d_in = d_in
        self.d_out = d_out
        self.k = k
        self.attr_config = attr_config or AttributeConfig()
        self.aggregation = aggregation
        self.euclid_radius = euclid_radius
        attr_dim = self.attr_config.dim(d_in)
        self.euclid = EdgeConditionedConv(d_in, d_out, attr_dim, hidden, clamp, rng)
        self.feature = EdgeConditionedConv(d_in, d_out, attr_dim, hidden, clamp, rng)

    def params(self, prefix: str):
        yield from self.euclid.params(f"{prefix}.euclid")
        yield from self.feature.params(f"{prefix}.feature")

    def build_graphs(self, positions: np.ndarray, x: np.ndarray,
                     k: int | None = None
                     ) -> tuple[NeighbourhoodGraph, NeighbourhoodGraph]:
        k = self.k if k is None else k
        if self.euclid_radius is not None:
            g_e = radius_graph(positions, self.euclid_radius)
        else:
            g_e = knn_graph(positions, k, include_self=True)
        g_f = knn_graph(x, k, include_self=True, space="feature")
        return g_e, g_f

    def forward(self, positions: np.ndarray, x: np.ndarray,
                graphs: tuple[NeighbourhoodGraph, NeighbourhoodGraph] | None = None,
                ) -> tuple[np.ndarray, dict]:
        n = x.shape[0]
        if graphs is None:
            if self.k > n:
                raise DimensionError(f"k={self.k} exceeds node count {n}")
            graphs = self.build_graphs(positions, x)
        g_e, g_f = graphs
        attrs_e = edge_attributes(g_e, positions, x, self.attr_config)
        attrs_f = edge_attributes(g_f, positions, x, self.attr_config)
        out_e, cache_e = self.euclid.forward(g_e, attrs_e.values, x)
        out_f, cache_f = self.feature.forward(g_f, attrs_f.values, x)
        if self.aggregation == "average":
            out = 0.5 * (out_e + out_f)
            route = None
        else:
            out = np.maximum(out_e, out_f)
            # per-entry share of the euclidean branch; ties split equally
            route = np.where(out_e > out_f, 1.0, 0.0)
            route[out_e == out_f] = 0.5
        cache = {
            "x": x, "g_e": g_e, "g_f": g_f,
            "cache_e": cache_e, "cache_f": cache_f, "route": route,
        }
        return out, cache

    def backward(self, cache: dict, grad_out: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the input node features (graphs held fixed)."""
        if self.aggregation == "average":
            g_e = g_f = 0.5 * grad_out
        else:
            g_e = grad_out * cache["route"]
            g_f = grad_out - g_e
        x = cache["x"]
        dattrs_e, dx = self.euclid.backward(cache["cache_e"], g_e)
        dattrs_f, dx_f = self.feature.backward(cache["cache_f"], g_f)
        dx = dx + dx_f
        for graph, dattrs in ((cache["g_e"], dattrs_e), (cache["g_f"], dattrs_f)):
            via_attrs = edge_attributes_backward(graph, x, self.attr_config, dattrs)
            if via_attrs is not None:
                dx += via_attrs
        return dx
