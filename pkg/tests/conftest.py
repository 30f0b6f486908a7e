"""Shared randomized-instance machinery for the suite.

Instances are sized so that brute-force enumeration stays cheap: at most 8
vertices, at most 10 fragile pairs, 2-3 layers, dimensions up to 4.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np
import pytest

from gnncert import (
    Aggregation,
    FeaturedGraph,
    GnnModel,
    Layer,
    Pooling,
    RobustnessInstance,
    TaskTarget,
)
from gnncert.models import predict_graph, predict_node


@dataclass
class InstanceSampler:
    seed: int

    def __post_init__(self):
        self.rng = random.Random(self.seed)
        self.nprng = np.random.default_rng(self.seed)

    def model(self, aggregation: Aggregation, d0: int, pooling: bool = False) -> GnnModel:
        rng, nprng = self.rng, self.nprng
        L = rng.randint(2, 3)
        dims = [d0] + [rng.randint(1, 4) for _ in range(L)]
        layers = [
            Layer(
                nprng.uniform(-1, 1, (dims[i + 1], dims[i])),
                nprng.uniform(-1, 1, (dims[i + 1], dims[i])),
                nprng.uniform(-0.5, 0.5, dims[i + 1]),
            )
            for i in range(L)
        ]
        pool = None
        if pooling:
            k = rng.randint(2, 4)
            pool = Pooling(nprng.uniform(-1, 1, (k, dims[-1])), nprng.uniform(-0.5, 0.5, k))
        return GnnModel(dims, aggregation, layers, pool)

    def graph(self, *, directed: bool | None = None, max_vertices: int = 8, edge_p: float = 0.35):
        rng = self.rng
        n = rng.randint(2, max_vertices)
        if directed is None:
            directed = rng.random() < 0.5
        d0 = rng.randint(1, 3)
        feats = self.nprng.uniform(-2, 2, (n, d0))
        pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
        edges = {p for p in pairs if rng.random() < edge_p}
        return FeaturedGraph(n, directed, edges, feats)

    def instance(
        self,
        aggregation: Aggregation,
        *,
        graph_task: bool | None = None,
        weak: bool | None = None,
        directed: bool | None = None,
        max_fragile: int = 10,
        with_local: bool | None = None,
    ) -> RobustnessInstance:
        rng = self.rng
        g = self.graph(directed=directed)
        if graph_task is None:
            graph_task = rng.random() < 0.3
        model = self.model(aggregation, g.feature_dim, pooling=graph_task)
        pairs = [(u, v) for u in range(g.num_vertices) for v in range(g.num_vertices) if u != v]
        cand = sorted({p if g.directed else (min(p), max(p)) for p in pairs})
        rng.shuffle(cand)
        fragile = set(cand[: rng.randint(1, min(max_fragile, len(cand)))])
        budget = rng.randint(0, len(fragile))
        if with_local is None:
            with_local = rng.random() < 0.4
        local = rng.randint(1, 3) if with_local else None
        if graph_task:
            target = TaskTarget(class_index=predict_graph(model, g))
        else:
            v0 = rng.randrange(g.num_vertices)
            target = TaskTarget(class_index=predict_node(model, g, v0), vertex=v0)
        if weak is None:
            weak = rng.random() < 0.3
        if weak and model.num_classes >= 2:
            target.weak_target = (target.class_index % model.num_classes) + 1
        return RobustnessInstance(model, g, target, fragile, budget, local)

    def incomplete(self, max_unknown: int = 6):
        """A random incomplete graph with its reference graph, for bound tests."""
        from gnncert import relaxation

        g = self.graph()
        pairs = [(u, v) for u in range(g.num_vertices) for v in range(g.num_vertices) if u != v]
        cand = sorted({p if g.directed else (min(p), max(p)) for p in pairs})
        self.rng.shuffle(cand)
        fragile = set(cand[: self.rng.randint(1, min(max_unknown, len(cand)))])
        return relaxation(g, fragile), g, fragile


@pytest.fixture
def sampler():
    return InstanceSampler(seed=20240809)


def all_toggle_combos():
    from gnncert import SearchConfig

    combos = []
    for bits in range(32):
        combos.append(
            SearchConfig(
                heuristics_on=bool(bits & 1),
                incremental_on=bool(bits & 2),
                reorder_on=bool(bits & 4),
                budget_tighten_on=bool(bits & 8),
                local_inference_on=bool(bits & 16),
            )
        )
    return combos
