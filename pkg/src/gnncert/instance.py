"""Robustness problem instances: model + graph + target + perturbation policy."""

from __future__ import annotations

from dataclasses import dataclass

from .graphs import FeaturedGraph, IncompleteGraph, Pair, canonical_pair, relaxation
from .models import GnnModel, TaskTarget


def delete_only_fragile(g: FeaturedGraph) -> set[Pair]:
    """Deletion-only policy: every existing non-self-loop edge is fragile."""
    return {canonical_pair(e, g.directed) for e in g.edges if e[0] != e[1]}


def all_pairs_fragile(g: FeaturedGraph) -> set[Pair]:
    """Insertion-and-deletion policy: every non-self-loop pair is fragile."""
    pairs = set()
    for u in range(g.num_vertices):
        for v in range(g.num_vertices):
            if u != v:
                pairs.add(canonical_pair((u, v), g.directed))
    return pairs


@dataclass
class RobustnessInstance:
    """One verification task.

    ``fragile`` holds canonical pairs (sorted for undirected graphs);
    ``local_budget`` of ``None`` means unlimited.  ``mode`` and ``max_budget``
    only drive which top-level question is asked (decision vs. radius).
    """

    model: GnnModel
    graph: FeaturedGraph
    target: TaskTarget
    fragile: set[Pair]
    global_budget: int
    local_budget: int | None = None
    mode: str = "verify"
    max_budget: int | None = None
    instance_id: str = ""

    def __post_init__(self) -> None:
        self.target.validate(self.model, self.graph.num_vertices)
        self.fragile = {canonical_pair(p, self.graph.directed) for p in self.fragile}
        if self.global_budget < 0:
            raise ValueError("global budget must be nonnegative")
        if self.local_budget is not None and self.local_budget < 0:
            raise ValueError("local budget must be nonnegative")
        if self.mode not in ("verify", "radius"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def initial_relaxation(self) -> IncompleteGraph:
        return relaxation(self.graph, self.fragile)
