"""Depth-first search over incomplete graphs, guided by the partial oracle.

``verify_instance`` decides whether an admissible perturbation flips the
prediction (returning a concrete witness when one exists);
``radius_instance`` computes the exact robustness radius up to a budget cap.
The recursion resolves one unknown edge per step, to its status in the
reference graph (same remaining budget) and to the opposite status (budget
minus one), short-circuiting on SAT.  It is realized with an explicit stack
so fragile sets in the thousands cannot overflow the interpreter stack.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .graphs import (
    EdgeStatus,
    FeaturedGraph,
    IncompleteGraph,
    Pair,
    canonical_pair,
    in_perturbation_space,
)
from .instance import RobustnessInstance
from .models import violates
from .oracle import BoundCache, OracleVerdict


@dataclass
class SearchConfig:
    """Optimization toggles; all off reproduces the naive algorithm."""

    heuristics_on: bool = True
    incremental_on: bool = True
    reorder_on: bool = True
    budget_tighten_on: bool = True
    local_inference_on: bool = True
    timeout: float | None = None
    max_budget: int | None = None

    @classmethod
    def naive(cls, **overrides) -> "SearchConfig":
        base = dict(
            heuristics_on=False,
            incremental_on=False,
            reorder_on=False,
            budget_tighten_on=False,
            local_inference_on=False,
        )
        base.update(overrides)
        return cls(**base)


@dataclass
class SearchStats:
    recursive_calls: int = 0
    sat_answers: int = 0
    unsat_answers: int = 0
    unknown_answers: int = 0
    fragile_count: int = 0
    wall_time: float = 0.0
    timed_out: bool = False

    @property
    def exploration_ratio(self) -> float:
        """log2 of the call count over ``|F| + 1``; near 1 means exhaustive."""
        return math.log2(max(self.recursive_calls, 1)) / (self.fragile_count + 1)

    def tally(self, verdict: OracleVerdict) -> None:
        if verdict is OracleVerdict.SAT:
            self.sat_answers += 1
        elif verdict is OracleVerdict.UNSAT:
            self.unsat_answers += 1
        else:
            self.unknown_answers += 1


class VerdictKind:
    ROBUST = "robust"
    NON_ROBUST = "non-robust"
    RADIUS = "radius"
    TIMEOUT = "timeout"


@dataclass
class Verdict:
    kind: str
    stats: SearchStats
    witness: FeaturedGraph | None = None
    radius: int | None = None


class SearchTimeout(Exception):
    pass


def influence_distance(pair: Pair, directed: bool, dist_to_target) -> int:
    """Hops before resolving ``pair`` can influence the target's feature.

    A conversion changes the head's neighborhood, so for directed graphs the
    head's distance governs influence; for undirected graphs both endpoints'
    neighborhoods change and the closer one wins.
    """
    u, v = pair
    if directed:
        return int(dist_to_target[v])
    return int(min(dist_to_target[u], dist_to_target[v]))


def edge_priority(
    h: IncompleteGraph,
    fragile: list[Pair],
    *,
    heuristics: bool,
    dist_to_target=None,
    component=None,
) -> list[Pair]:
    """Static resolution order for the fragile pairs.

    With heuristics (node tasks): edges in the target's connected component
    first, then by influence distance, ties lexicographic.  Otherwise plain
    lexicographic order.
    """
    if not heuristics or dist_to_target is None:
        return sorted(fragile)

    def key(pair):
        out_of_component = component is not None and not (
            component[pair[0]] or component[pair[1]]
        )
        return (out_of_component, influence_distance(pair, h.directed, dist_to_target), pair)

    return sorted(fragile, key=key)


def pick_edge(
    h: IncompleteGraph,
    *,
    heuristics: bool = False,
    dist_to_target=None,
    component=None,
) -> Pair:
    """Choose the next unknown edge to resolve (first in priority order)."""
    unknown = h.canonical_unknown()
    if not unknown:
        raise ValueError("no unknown edges to pick")
    order = edge_priority(
        h, unknown, heuristics=heuristics, dist_to_target=dist_to_target, component=component
    )
    return order[0]


def infer_local(cache: BoundCache) -> list[Pair]:
    """Fix, to their reference status, all unknown edges incident to vertices
    whose local budget is exhausted; repeats until no vertex fires."""
    instance = cache.instance
    if instance.local_budget is None:
        return []
    inferred: list[Pair] = []
    g_edges = instance.graph.edges
    changed = True
    while changed:
        changed = False
        for v in range(cache.h.num_vertices):
            if not cache.local_exhausted(v):
                continue
            pairs = sorted(
                canonical_pair((u, v), cache.h.directed) for u in cache.h.in_unknown(v)
            )
            for pair in pairs:
                status = EdgeStatus.NORMAL if pair in g_edges else EdgeStatus.NON
                cache.apply_edge(pair, status)
                inferred.append(pair)
                changed = True
    return inferred


@dataclass
class _Frame:
    budget: int
    mark: int
    children: list[tuple[Pair, EdgeStatus, int, str]]
    scan_from: int = 0
    index: int = 0
    child_mark: int = 0
    partial: dict = field(default_factory=dict)


def _build_children(
    cache: BoundCache, config: SearchConfig, budget: int, priority: list[Pair], scan_from: int
) -> tuple[list[tuple[Pair, EdgeStatus, int, str]], int]:
    # everything before scan_from was resolved by ancestors, so the first
    # unknown pair sits at or after it
    unknown = cache.h.unknown_edges
    index = scan_from
    pair = None
    while index < len(priority):
        p = priority[index]
        if p in unknown:
            pair = p
            break
        index += 1
    if pair is None:
        raise ValueError("no unknown edges to pick")
    g_has = pair in cache.g.edges
    match_status = EdgeStatus.NORMAL if g_has else EdgeStatus.NON
    opp_status = EdgeStatus.NON if g_has else EdgeStatus.NORMAL
    children = [(pair, match_status, budget, "match")]
    heads = cache.affected_heads(pair)
    opp_ok = budget > 0 and not any(cache.local_exhausted(w) for w in heads)
    if opp_ok:
        opp_child = (pair, opp_status, budget - 1, "opp")
        if config.heuristics_on:
            children.insert(0, opp_child)
        else:
            children.append(opp_child)
    return children, index + 1


def _check_deadline(deadline: float | None) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise SearchTimeout


def run_check(
    cache: BoundCache,
    budget: int,
    config: SearchConfig,
    stats: SearchStats,
    deadline: float | None = None,
) -> tuple[bool, FeaturedGraph | None]:
    """Decide whether some completion of the cache's graph within
    ``distance + budget`` of the reference violates the target.

    Returns ``(sat, witness)``; the cache is restored to its entry state.
    """
    witness: FeaturedGraph | None = None
    root_mark = cache.mark()
    priority = edge_priority(
        cache.h,
        cache.h.canonical_unknown(),
        heuristics=config.heuristics_on,
        dist_to_target=cache.dist_to_target,
        component=cache.component,
    )

    def enter(d: int, scan_from: int) -> "_Frame | bool":
        nonlocal witness
        stats.recursive_calls += 1
        _check_deadline(deadline)
        mark = cache.mark()
        if config.local_inference_on:
            infer_local(cache)
        verdict = cache.oracle_call(d)
        stats.tally(verdict)
        if verdict is OracleVerdict.SAT:
            if witness is None:
                witness = cache.grounding_graph()
            cache.undo_to(mark)
            return True
        if verdict is OracleVerdict.UNSAT:
            cache.undo_to(mark)
            return False
        children, next_scan = _build_children(cache, config, d, priority, scan_from)
        return _Frame(budget=d, mark=mark, children=children, scan_from=next_scan)

    try:
        outcome = enter(budget, 0)
        if isinstance(outcome, bool):
            return outcome, witness
        stack: list[_Frame] = [outcome]
        result: bool | None = None
        while stack:
            frame = stack[-1]
            if result is not None:
                cache.undo_to(frame.child_mark)
                if result:
                    cache.undo_to(frame.mark)
                    stack.pop()
                    continue
                result = None
            if frame.index >= len(frame.children):
                cache.undo_to(frame.mark)
                stack.pop()
                result = False
                continue
            pair, status, child_budget, _tag = frame.children[frame.index]
            frame.index += 1
            frame.child_mark = cache.apply_edge(pair, status)
            outcome = enter(child_budget, frame.scan_from)
            if isinstance(outcome, bool):
                result = outcome
            else:
                stack.append(outcome)
        assert result is not None
        return result, witness
    except SearchTimeout:
        cache.undo_to(root_mark)
        stats.timed_out = True
        raise


def run_radius(
    cache: BoundCache,
    max_budget: int,
    config: SearchConfig,
    stats: SearchStats,
    deadline: float | None = None,
) -> int:
    """Largest ``d <= max_budget`` such that no completion within relative
    distance ``d`` violates the target; ``-1`` if violated at distance zero."""
    root_mark = cache.mark()
    priority = edge_priority(
        cache.h,
        cache.h.canonical_unknown(),
        heuristics=config.heuristics_on,
        dist_to_target=cache.dist_to_target,
        component=cache.component,
    )

    def enter(d_m: int, scan_from: int) -> "_Frame | int":
        mark = cache.mark()
        if config.local_inference_on:
            infer_local(cache)
        while True:
            stats.recursive_calls += 1
            _check_deadline(deadline)
            verdict = cache.oracle_call(d_m)
            stats.tally(verdict)
            if verdict is OracleVerdict.UNSAT:
                cache.undo_to(mark)
                return d_m
            if verdict is OracleVerdict.SAT:
                if d_m == 0:
                    cache.undo_to(mark)
                    return -1
                d_m -= 1
                continue
            children, next_scan = _build_children(cache, config, d_m, priority, scan_from)
            return _Frame(budget=d_m, mark=mark, children=children, scan_from=next_scan)

    try:
        outcome = enter(max_budget, 0)
        if isinstance(outcome, int):
            return outcome
        stack: list[_Frame] = [outcome]
        result: int | None = None
        final: int | None = None
        while stack:
            frame = stack[-1]
            if result is not None:
                cache.undo_to(frame.child_mark)
                _, _, _, tag = frame.children[frame.index - 1]
                frame.partial[tag] = result
                result = None
            if frame.index >= len(frame.children):
                cache.undo_to(frame.mark)
                stack.pop()
                d1 = frame.partial["match"]
                d2 = frame.partial.get("opp")
                combined = d1 if d2 is None else min(d1, d2 + 1)
                result = combined
                final = combined
                continue
            pair, status, child_budget, _tag = frame.children[frame.index]
            frame.index += 1
            frame.child_mark = cache.apply_edge(pair, status)
            outcome = enter(child_budget, frame.scan_from)
            if isinstance(outcome, int):
                result = outcome
            else:
                stack.append(outcome)
        assert final is not None
        return final
    except SearchTimeout:
        cache.undo_to(root_mark)
        stats.timed_out = True
        raise


def _make_cache(instance: RobustnessInstance, config: SearchConfig, tighten_budget: int) -> BoundCache:
    return BoundCache(
        instance,
        incremental=config.incremental_on,
        reorder=config.reorder_on,
        budget_tighten=config.budget_tighten_on,
        tighten_budget=tighten_budget,
    )


def verify_instance(instance: RobustnessInstance, config: SearchConfig | None = None) -> Verdict:
    """Robustness decision: ``ROBUST`` or ``NON_ROBUST`` with a validated
    witness, or ``TIMEOUT`` with partial statistics."""
    config = config or SearchConfig()
    stats = SearchStats(fragile_count=len(instance.fragile))
    start = time.monotonic()
    deadline = start + config.timeout if config.timeout is not None else None
    cache = _make_cache(instance, config, instance.global_budget)
    try:
        sat, witness = run_check(cache, instance.global_budget, config, stats, deadline)
    except SearchTimeout:
        stats.wall_time = time.monotonic() - start
        return Verdict(VerdictKind.TIMEOUT, stats)
    stats.wall_time = time.monotonic() - start
    if not sat:
        return Verdict(VerdictKind.ROBUST, stats)
    assert witness is not None
    if not in_perturbation_space(
        instance.graph, witness, instance.fragile, instance.global_budget, instance.local_budget
    ):
        raise RuntimeError("internal error: witness outside the admissible space")
    if not violates(instance.model, witness, instance.target):
        raise RuntimeError("internal error: witness does not violate the target")
    return Verdict(VerdictKind.NON_ROBUST, stats, witness=witness)


def radius_instance(
    instance: RobustnessInstance,
    config: SearchConfig | None = None,
    max_budget: int | None = None,
) -> Verdict:
    """Exact robustness radius in ``[-1, max_budget]`` (or ``TIMEOUT``)."""
    config = config or SearchConfig()
    if max_budget is None:
        max_budget = instance.max_budget
    if max_budget is None:
        max_budget = config.max_budget
    if max_budget is None:
        max_budget = instance.global_budget
    stats = SearchStats(fragile_count=len(instance.fragile))
    start = time.monotonic()
    deadline = start + config.timeout if config.timeout is not None else None
    cache = _make_cache(instance, config, max_budget)
    try:
        value = run_radius(cache, max_budget, config, stats, deadline)
    except SearchTimeout:
        stats.wall_time = time.monotonic() - start
        return Verdict(VerdictKind.TIMEOUT, stats)
    stats.wall_time = time.monotonic() - start
    return Verdict(VerdictKind.RADIUS, stats, radius=value)
