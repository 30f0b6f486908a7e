"""Ground-truth machinery: exhaustive verification and hardness gadgets.

``brute_check``/``brute_radius`` enumerate every completion of the fragile
relaxation (guarded by a completion cap) and evaluate the model exactly,
serving as the reference oracle for differential testing.  ``make_gadget``
builds the star-graph instances that embed a subset-sum question into the
robustness problem, one construction per aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import FeaturedGraph, Pair, canonical_pair, orientations
from .instance import RobustnessInstance
from .models import Aggregation, GnnModel, Layer, TaskTarget, violates


class EnumerationLimitError(RuntimeError):
    pass


DEFAULT_MAX_COMPLETIONS = 1 << 20


def _admissible_masks(instance: RobustnessInstance, fragile: list[Pair], budget: int):
    """Yield (mask, distance) for completions within budgets, mask ascending.

    Bit ``i`` set means fragile pair ``i`` is flipped relative to the
    reference graph; the distance of the completion is the popcount.
    """
    n = instance.graph.num_vertices
    directed = instance.graph.directed
    delta = instance.local_budget
    for mask in range(1 << len(fragile)):
        dist = mask.bit_count()
        if dist > budget:
            continue
        if delta is not None:
            spent = [0] * n
            ok = True
            for i, (u, v) in enumerate(fragile):
                if not mask >> i & 1:
                    continue
                if directed:
                    spent[v] += 1
                    if spent[v] > delta:
                        ok = False
                        break
                else:
                    spent[u] += 1
                    if u != v:
                        spent[v] += 1
                    if spent[u] > delta or spent[v] > delta:
                        ok = False
                        break
            if not ok:
                continue
        yield mask, dist


def _completion_for_mask(instance: RobustnessInstance, fragile: list[Pair], mask: int) -> FeaturedGraph:
    g = instance.graph
    edges = set(g.edges)
    for i, pair in enumerate(fragile):
        flipped = bool(mask >> i & 1)
        present = pair in g.canonical_edges()
        want = present != flipped
        for e in orientations(pair, g.directed):
            if want:
                edges.add(e)
            else:
                edges.discard(e)
    return FeaturedGraph(g.num_vertices, g.directed, edges, g.features)


def _guard(fragile_count: int, max_completions: int) -> None:
    if 1 << fragile_count > max_completions:
        raise EnumerationLimitError(
            f"2^{fragile_count} completions exceed the cap of {max_completions}"
        )


def brute_check(
    instance: RobustnessInstance,
    max_completions: int = DEFAULT_MAX_COMPLETIONS,
) -> tuple[bool, FeaturedGraph | None]:
    """Exhaustive robustness check.

    Returns ``(robust, witness)``: the first admissible completion (in mask
    order) that violates the target, or ``(True, None)``.
    """
    fragile = sorted(instance.fragile)
    _guard(len(fragile), max_completions)
    for mask, _dist in _admissible_masks(instance, fragile, instance.global_budget):
        candidate = _completion_for_mask(instance, fragile, mask)
        if violates(instance.model, candidate, instance.target):
            return False, candidate
    return True, None


def brute_radius(
    instance: RobustnessInstance,
    max_budget: int,
    max_completions: int = DEFAULT_MAX_COMPLETIONS,
) -> int:
    """Largest ``d <= max_budget`` with no admissible violation at distance
    ``<= d``; ``-1`` when the reference graph itself is violated."""
    fragile = sorted(instance.fragile)
    _guard(len(fragile), max_completions)
    best = max_budget
    for mask, dist in _admissible_masks(instance, fragile, min(max_budget, len(fragile))):
        if dist - 1 >= best:
            continue
        candidate = _completion_for_mask(instance, fragile, mask)
        if violates(instance.model, candidate, instance.target):
            best = dist - 1
    return best


def subset_sum_solve(values: list[int], target: int) -> bool:
    """Exact subset-sum decision by dynamic programming over reachable sums."""
    reachable = {0}
    for s in values:
        reachable |= {r + s for r in reachable if r + s <= target}
        if target in reachable:
            return True
    return target in reachable


@dataclass
class GadgetSpec:
    """Subset-sum instance embedded into a robustness question."""

    values: list[int]
    target: int
    aggregation: Aggregation

    def __post_init__(self) -> None:
        if not self.values or any(s <= 0 for s in self.values):
            raise ValueError("values must be a nonempty list of positive integers")
        if self.target <= 0:
            raise ValueError("target must be positive")


def make_gadget(spec: GadgetSpec) -> RobustnessInstance:
    """Build the gadget instance for the chosen aggregation.

    The defended class is 2: the prediction can be pushed to class 1 exactly
    when some subset of ``values`` sums to ``target``, so the instance is
    non-robust iff the subset-sum question is solvable.
    """
    s = spec.values
    n = len(s)
    t = spec.target
    if spec.aggregation in (Aggregation.SUM, Aggregation.MEAN):
        scale = (n + 1) if spec.aggregation is Aggregation.MEAN else 1
        # vertex layout: 0 = the -target helper, 1..n = value vertices, n+1 = v
        feats = np.zeros((n + 2, 1))
        feats[0, 0] = -scale * t
        for i, si in enumerate(s):
            feats[1 + i, 0] = scale * si
        v = n + 1
        edges = {(u, v) for u in range(n + 1)}
        graph = FeaturedGraph(n + 2, True, edges, feats)
        layers = [
            Layer(C=np.zeros((2, 1)), A=np.array([[1.0], [-1.0]]), b=np.zeros(2)),
            Layer(C=np.array([[0.0, 0.0], [1.0, 1.0]]), A=np.zeros((2, 2)), b=np.array([0.5, 0.0])),
        ]
        model = GnnModel([1, 2, 2], spec.aggregation, layers)
        fragile = set(edges)
    else:
        d = n + 1
        # vertex layout: 0..n-1 = value vertices, n = the target helper, n+1 = v
        feats = np.zeros((n + 2, d))
        for i, si in enumerate(s):
            feats[i, i] = si
        feats[n, n] = t
        v = n + 1
        edges = {(u, v) for u in range(n + 1)}
        graph = FeaturedGraph(n + 2, True, edges, feats)
        # only the value edges are fragile; the target edge always stays
        fragile = {(i, v) for i in range(n)}
        second_C = np.vstack([
            np.concatenate([-np.ones(n), [1.0]]),
            np.concatenate([np.ones(n), [-1.0]]),
        ])
        layers = [
            Layer(C=np.zeros((d, d)), A=np.eye(d), b=np.zeros(d)),
            Layer(C=second_C, A=np.zeros((2, d)), b=np.zeros(2)),
            Layer(C=np.array([[0.0, 0.0], [1.0, 1.0]]), A=np.zeros((2, 2)), b=np.array([0.5, 0.0])),
        ]
        model = GnnModel([d, d, 2, 2], Aggregation.MAX, layers)
    target = TaskTarget(class_index=2, vertex=v)
    return RobustnessInstance(
        model=model,
        graph=graph,
        target=target,
        fragile={canonical_pair(p, True) for p in fragile},
        global_budget=n,
    )
