"""Message-passing GNN models and their exact evaluation on normal graphs.

A model is a stack of layers ``relu(C x_v + A aggr{x_u : u in N(v)} + b)``
over incoming neighborhoods, with sum, max or mean aggregation, optionally
followed by a graph-level readout ``C_pool * sum_v x_v + b_pool``.
Aggregation over an empty neighborhood is the zero vector for all three
aggregations (``max`` and ``mean`` by convention).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graphs import FeaturedGraph


class Aggregation(Enum):
    SUM = "sum"
    MAX = "max"
    MEAN = "mean"


@dataclass
class Layer:
    """One message-passing layer: self transform C, neighbor transform A, bias b."""

    C: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        self.C = np.asarray(self.C, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)


@dataclass
class Pooling:
    """Graph-level readout applied to the sum of final-layer features."""

    C: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        self.C = np.asarray(self.C, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)


@dataclass
class GnnModel:
    dims: list[int]
    aggregation: Aggregation
    layers: list[Layer]
    pooling: Pooling | None = None

    def __post_init__(self) -> None:
        if len(self.layers) < 1:
            raise ValueError("model needs at least one layer")
        if len(self.dims) != len(self.layers) + 1:
            raise ValueError("dims must list d0..dL, one more entry than layers")
        if any(d < 1 for d in self.dims):
            raise ValueError("all dimensions must be positive")
        for i, layer in enumerate(self.layers):
            want = (self.dims[i + 1], self.dims[i])
            for name, mat in (("C", layer.C), ("A", layer.A)):
                if mat.shape != want:
                    raise ValueError(f"layer {i}: {name} has shape {mat.shape}, expected {want}")
            if layer.b.shape != (self.dims[i + 1],):
                raise ValueError(f"layer {i}: b has shape {layer.b.shape}, expected ({self.dims[i + 1]},)")
        if self.pooling is not None:
            dL = self.dims[-1]
            if self.pooling.C.ndim != 2 or self.pooling.C.shape[1] != dL:
                raise ValueError(f"pooling: C has shape {self.pooling.C.shape}, expected (*, {dL})")
            if self.pooling.b.shape != (self.pooling.C.shape[0],):
                raise ValueError("pooling: b length must match C rows")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_classes(self) -> int:
        """Number of output classes: pooled width for graph models, dL otherwise."""
        if self.pooling is not None:
            return self.pooling.C.shape[0]
        return self.dims[-1]


@dataclass
class TaskTarget:
    """What to defend: a class at a vertex (node task) or for the whole graph.

    ``vertex is None`` means graph classification.  ``class_index`` and
    ``weak_target`` are 1-indexed; ``weak_target`` fixes the single competitor
    class for weak robustness, ``None`` means robustness against every class.
    """

    class_index: int
    vertex: int | None = None
    weak_target: int | None = None

    @property
    def is_node(self) -> bool:
        return self.vertex is not None

    def validate(self, model: GnnModel, num_vertices: int) -> None:
        k = model.num_classes
        if self.is_node and model.pooling is not None:
            raise ValueError("node target given for a model with a pooling head")
        if not self.is_node and model.pooling is None:
            raise ValueError("graph target requires a pooling head")
        if self.is_node and not 0 <= self.vertex < num_vertices:
            raise ValueError(f"target vertex {self.vertex} out of range")
        if not 1 <= self.class_index <= k:
            raise ValueError(f"class {self.class_index} out of range 1..{k}")
        if self.weak_target is not None:
            if not 1 <= self.weak_target <= k:
                raise ValueError(f"weak target class {self.weak_target} out of range 1..{k}")
            if self.weak_target == self.class_index:
                raise ValueError("weak target class must differ from the defended class")


def default_weak_target(class_index: int, num_classes: int) -> int:
    """Default fixed competitor: the cyclic successor of the defended class."""
    return (class_index % num_classes) + 1


def aggregate(aggregation: Aggregation, rows: np.ndarray, dim: int) -> np.ndarray:
    """Aggregate neighbor feature rows; the empty multiset gives zeros."""
    if rows.shape[0] == 0:
        return np.zeros(dim)
    if aggregation is Aggregation.SUM:
        return rows.sum(axis=0)
    if aggregation is Aggregation.MAX:
        return rows.max(axis=0)
    return rows.sum(axis=0) / rows.shape[0]


def forward(model: GnnModel, g: FeaturedGraph) -> list[np.ndarray]:
    """Per-layer feature arrays ``[(n, d0), ..., (n, dL)]``."""
    if g.feature_dim != model.dims[0]:
        raise ValueError(f"graph features have dim {g.feature_dim}, model expects {model.dims[0]}")
    nbrs = [sorted(g.in_neighbors(v)) for v in range(g.num_vertices)]
    feats = [g.features]
    for li, layer in enumerate(model.layers):
        prev = feats[-1]
        out = np.empty((g.num_vertices, model.dims[li + 1]))
        for v in range(g.num_vertices):
            agg = aggregate(model.aggregation, prev[nbrs[v]], model.dims[li])
            out[v] = np.maximum(layer.C @ prev[v] + layer.A @ agg + layer.b, 0.0)
        feats.append(out)
    return feats


def pooled_scores(model: GnnModel, final_feats: np.ndarray) -> np.ndarray:
    if model.pooling is None:
        raise ValueError("model has no pooling head")
    return model.pooling.C @ final_feats.sum(axis=0) + model.pooling.b


def final_scores(model: GnnModel, g: FeaturedGraph, target: TaskTarget) -> np.ndarray:
    """Score vector the robustness predicate is evaluated on."""
    feats = forward(model, g)
    if target.is_node:
        return feats[-1][target.vertex]
    return pooled_scores(model, feats[-1])


def _argmax_class(scores: np.ndarray) -> int:
    # np.argmax returns the first maximal index: ties break to the smallest class
    return int(np.argmax(scores)) + 1


def predict_node(model: GnnModel, g: FeaturedGraph, v: int) -> int:
    """Predicted (1-indexed) class of vertex ``v``, ties to the smallest index."""
    return _argmax_class(forward(model, g)[-1][v])


def predict_graph(model: GnnModel, g: FeaturedGraph) -> int:
    """Predicted (1-indexed) class of the whole graph."""
    return _argmax_class(pooled_scores(model, forward(model, g)[-1]))


def violates_scores(scores: np.ndarray, target: TaskTarget) -> bool:
    """Whether some competitor strictly beats the defended class in ``scores``."""
    c = target.class_index - 1
    if target.weak_target is not None:
        return bool(scores[target.weak_target - 1] > scores[c])
    return bool(np.any(scores > scores[c]))


def violates(model: GnnModel, g: FeaturedGraph, target: TaskTarget) -> bool:
    """Whether ``g`` witnesses non-robustness for the given target."""
    target.validate(model, g.num_vertices)
    return violates_scores(final_scores(model, g, target), target)
