"""Acceptance suite: one test per criterion, one PASS line printed each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines.  The randomized families use fixed seeds so runs are reproducible.
"""

import random
import statistics
import sys
import time

import numpy as np
import psutil
import pytest

from conftest import InstanceSampler, all_toggle_combos

from gnncert import (
    Aggregation,
    FeaturedGraph,
    GnnModel,
    Layer,
    RobustnessInstance,
    SearchConfig,
    TaskTarget,
    VerdictKind,
    completions,
    in_perturbation_space,
    radius_instance,
    verify_instance,
)
from gnncert.bounds import BudgetContext, propagate
from gnncert.bruteforce import GadgetSpec, brute_check, brute_radius, make_gadget, subset_sum_solve
from gnncert.graphs import EdgeStatus
from gnncert.instance import delete_only_fragile
from gnncert.models import forward, predict_node
from gnncert.oracle import BoundCache, oracle_call


def report(criterion: str, detail: str) -> None:
    print(f"[ACCEPTANCE] {criterion}: PASS  ({detail})", file=sys.stderr, flush=True)


def test_criterion_1_oracle_search_exactness():
    """Engine verdict equals brute force on >=1000 instances per aggregation,
    across all toggle combinations, tasks, modes and orientations."""
    sampler = InstanceSampler(seed=101)
    combos = all_toggle_combos()
    per_aggregation = 1000
    coverage = set()
    checked = 0
    start = time.monotonic()
    for aggregation in Aggregation:
        for i in range(per_aggregation):
            inst = sampler.instance(aggregation)
            config = combos[(checked + i) % len(combos)]
            robust, _ = brute_check(inst)
            verdict = verify_instance(inst, config)
            assert verdict.kind in (VerdictKind.ROBUST, VerdictKind.NON_ROBUST)
            assert (verdict.kind == VerdictKind.ROBUST) == robust, (
                aggregation,
                i,
                config,
            )
            coverage.add(
                (
                    inst.graph.directed,
                    inst.target.is_node,
                    inst.target.weak_target is not None,
                    inst.local_budget is not None,
                )
            )
        checked += per_aggregation
    assert len(coverage) == 16, "some task/mode/orientation combination never sampled"
    report(
        "criterion 1 (oracle/search exactness)",
        f"{checked} instances, 100% agreement, {time.monotonic() - start:.0f}s",
    )


def test_criterion_2_bound_soundness():
    """Exact features of every completion lie inside propagated intervals for
    >=500 incomplete graphs, all aggregations, all propagation variants."""
    sampler = InstanceSampler(seed=202)
    graphs_checked = 0
    completions_checked = 0
    for aggregation in Aggregation:
        for _ in range(170):
            h, g, fragile = sampler.incomplete(max_unknown=10 if sampler.rng.random() < 0.15 else 7)
            model = sampler.model(aggregation, g.feature_dim)
            cap = sampler.rng.randint(0, len(fragile))
            local = sampler.rng.randint(1, 3) if sampler.rng.random() < 0.3 else None
            ctx = BudgetContext(
                cap,
                g,
                None if local is None else np.full(g.num_vertices, local, dtype=np.int64),
            )
            states = {
                (reorder, budgeted): propagate(
                    model, h, budget=ctx if budgeted else None, reorder=reorder
                )
                for reorder in (False, True)
                for budgeted in (False, True)
            }
            graphs_checked += 1
            for comp in completions(h):
                feats = forward(model, comp)
                admissible = in_perturbation_space(g, comp, fragile, cap, local)
                completions_checked += 1
                for (reorder, budgeted), state in states.items():
                    if budgeted and not admissible:
                        continue
                    for l, f in enumerate(feats):
                        assert np.all(f >= state.lower[l] - 1e-9), (aggregation, reorder, budgeted)
                        assert np.all(f <= state.upper[l] + 1e-9), (aggregation, reorder, budgeted)
    assert graphs_checked >= 500
    report(
        "criterion 2 (bound soundness)",
        f"{graphs_checked} incomplete graphs, {completions_checked} completions, 0 violations",
    )


def test_criterion_3_tightness_ordering():
    """Reordered bounds nest inside unreordered ones (sum/mean), and
    budget-tightened bounds nest inside untightened ones, on every sample."""
    sampler = InstanceSampler(seed=303)
    samples = 0
    for aggregation in Aggregation:
        for _ in range(40):
            h, g, fragile = sampler.incomplete()
            model = sampler.model(aggregation, g.feature_dim)
            cap = sampler.rng.randint(0, max(0, len(fragile) - 1))
            ctx = BudgetContext(cap, g)
            for budgeted in (False, True):
                base = propagate(model, h, budget=ctx if budgeted else None, reorder=False)
                if aggregation is not Aggregation.MAX:
                    reordered = propagate(model, h, budget=ctx if budgeted else None, reorder=True)
                    for l in range(len(base.upper)):
                        assert np.all(reordered.upper[l] <= base.upper[l] + 1e-12)
                        assert np.all(reordered.lower[l] >= base.lower[l] - 1e-12)
            for reorder in (False, True):
                loose = propagate(model, h, reorder=reorder)
                tight = propagate(model, h, budget=ctx, reorder=reorder)
                for l in range(len(loose.upper)):
                    assert np.all(tight.upper[l] <= loose.upper[l] + 1e-12)
                    assert np.all(tight.lower[l] >= loose.lower[l] - 1e-12)
            samples += 1
    report("criterion 3 (tightness ordering)", f"{samples} instances, 100% nested")


def test_criterion_4_hardness_gadgets():
    """For each aggregation, the gadget instance is non-robust exactly when
    the embedded subset-sum question is solvable."""
    rng = random.Random(404)
    per_aggregation = 200
    for aggregation in Aggregation:
        solvable_seen = unsolvable_seen = 0
        for _ in range(per_aggregation):
            n = rng.randint(1, 8)
            values = [rng.randint(1, 20) for _ in range(n)]
            t = rng.randint(1, 25)
            inst = make_gadget(GadgetSpec(values, t, aggregation))
            verdict = verify_instance(inst, SearchConfig())
            solvable = subset_sum_solve(values, t)
            assert (verdict.kind == VerdictKind.NON_ROBUST) == solvable, (
                aggregation,
                values,
                t,
            )
            if solvable:
                solvable_seen += 1
            else:
                unsolvable_seen += 1
        assert solvable_seen and unsolvable_seen
    report(
        "criterion 4 (hardness gadgets)",
        f"{3 * per_aggregation} gadgets, non-robust <=> subset-sum solvable",
    )


def test_criterion_5_radius_exactness():
    """Engine radius equals brute-force radius on the criterion-1 family."""
    sampler = InstanceSampler(seed=505)
    combos = all_toggle_combos()
    checked = 0
    for aggregation in Aggregation:
        for i in range(90):
            inst = sampler.instance(aggregation)
            d_m = sampler.rng.randint(0, len(inst.fragile))
            expected = brute_radius(inst, d_m)
            verdict = radius_instance(inst, combos[(checked * 11 + i) % len(combos)], d_m)
            assert verdict.radius == expected, (aggregation, i, d_m)
            checked += 1
    report("criterion 5 (radius exactness)", f"{checked} instances, 100% agreement")


def test_criterion_6_incremental_integrity():
    """Randomized apply/undo fuzzing leaves caches bit-identical to
    from-scratch propagation; verdicts match with incremental on and off."""
    sampler = InstanceSampler(seed=606)
    rng = random.Random(606)
    total_ops = 0
    for trial in range(10):
        # graph tasks disable distance pruning, so every row stays fresh
        inst = sampler.instance(
            rng.choice(list(Aggregation)), graph_task=True, max_fragile=8
        )
        reorder = rng.random() < 0.5
        tighten = rng.random() < 0.5
        cache = BoundCache(inst, reorder=reorder, budget_tighten=tighten)
        initial = [a.copy() for arrays in (cache.exact, cache.up, cache.lo) for a in arrays]
        stack = []
        for op in range(1050):
            unknown = cache.h.canonical_unknown()
            if unknown and (not stack or rng.random() < 0.6):
                pair = rng.choice(unknown)
                status = rng.choice([EdgeStatus.NORMAL, EdgeStatus.NON])
                stack.append(cache.apply_edge(pair, status))
            elif stack:
                cache.undo_to(stack.pop())
            total_ops += 1
            if op % 200 == 0:
                fresh = BoundCache(
                    inst, h=cache.h.copy(), reorder=reorder, budget_tighten=tighten
                )
                for name in ("exact", "up", "lo"):
                    a, b = getattr(cache, name), getattr(fresh, name)
                    for l in range(len(a)):
                        assert np.array_equal(a[l], b[l]), (trial, op, name, l)
        while stack:
            cache.undo_to(stack.pop())
        final = [a for arrays in (cache.exact, cache.up, cache.lo) for a in arrays]
        for a, b in zip(initial, final):
            assert np.array_equal(a, b)
    assert total_ops >= 10_000
    # oracle and search verdicts are insensitive to the incremental toggle
    for _ in range(60):
        inst = sampler.instance(rng.choice(list(Aggregation)), max_fragile=6)
        inc = BoundCache(inst, incremental=True)
        non = BoundCache(inst, incremental=False)
        for pair in list(inc.h.canonical_unknown()):
            if rng.random() < 0.5:
                continue
            status = rng.choice([EdgeStatus.NORMAL, EdgeStatus.NON])
            inc.apply_edge(pair, status)
            non.apply_edge(pair, status)
        d = rng.randint(0, inst.global_budget)
        assert oracle_call(inc, d) is oracle_call(non, d)
        on = verify_instance(inst, SearchConfig(incremental_on=True))
        off = verify_instance(inst, SearchConfig(incremental_on=False))
        assert on.kind == off.kind
    report(
        "criterion 6 (incremental integrity)",
        f"{total_ops} apply/undo ops bit-identical, verdicts toggle-invariant",
    )


def test_criterion_7_exploration_ratio():
    """Measured ratio never exceeds 1; the naive configuration explores
    strictly more than the full-heuristic one on a fixed 100-instance suite."""
    sampler = InstanceSampler(seed=777)
    instances = []
    while len(instances) < 100:
        inst = sampler.instance(list(Aggregation)[len(instances) % 3], max_fragile=8)
        if len(inst.fragile) >= 4 and inst.global_budget >= 1:
            instances.append(inst)
    full_ratios, naive_ratios = [], []
    for inst in instances:
        full = verify_instance(inst, SearchConfig())
        naive = verify_instance(inst, SearchConfig.naive())
        assert full.kind == naive.kind
        assert 0.0 <= full.stats.exploration_ratio <= 1.0
        assert 0.0 <= naive.stats.exploration_ratio <= 1.0
        full_ratios.append(full.stats.exploration_ratio)
        naive_ratios.append(naive.stats.exploration_ratio)
    mean_full = statistics.mean(full_ratios)
    mean_naive = statistics.mean(naive_ratios)
    assert mean_naive > mean_full
    report(
        "criterion 7 (exploration ratio)",
        f"alpha <= 1 everywhere; mean naive {mean_naive:.3f} > mean full {mean_full:.3f}",
    )


def _scale_model(nprng, dims):
    def kaiming(shape):
        bound = np.sqrt(1.0 / shape[1])
        return nprng.uniform(-bound, bound, shape)

    layers = [
        Layer(
            kaiming((dims[i + 1], dims[i])),
            kaiming((dims[i + 1], dims[i])),
            nprng.uniform(-0.1, 0.1, dims[i + 1]),
        )
        for i in range(len(dims) - 1)
    ]
    return GnnModel(dims, Aggregation.SUM, layers)


def test_criterion_8_scale_smoke():
    """300-vertex average-degree-2 graph, 4-layer hidden-32 model,
    deletion-only fragile set, budget 5: verify 50 targets single-threaded
    under the 300s per-vertex timeout without approaching 8 GB of memory."""
    rng = random.Random(99)
    nprng = np.random.default_rng(99)
    n = 300
    edges = set()
    while len(edges) < 2 * n:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            edges.add((u, v))
    g = FeaturedGraph(n, True, edges, nprng.normal(0, 1, (n, 16)))
    model = _scale_model(nprng, [16, 32, 32, 32, 4])
    fragile = delete_only_fragile(g)
    proc = psutil.Process()
    limit = 8 * 1024 ** 3
    peak = 0
    kinds = {}
    start = time.monotonic()
    for v0 in rng.sample(range(n), 50):
        inst = RobustnessInstance(
            model,
            g,
            TaskTarget(class_index=predict_node(model, g, v0), vertex=v0),
            set(fragile),
            5,
        )
        verdict = verify_instance(inst, SearchConfig(timeout=300.0))
        kinds[verdict.kind] = kinds.get(verdict.kind, 0) + 1
        peak = max(peak, proc.memory_info().rss)
        assert peak < limit, f"memory {peak / 1e9:.2f} GB exceeds the 8 GB budget"
    assert sum(kinds.values()) == 50
    report(
        "criterion 8 (scale smoke)",
        f"50 vertices in {time.monotonic() - start:.0f}s, verdicts {kinds}, "
        f"peak memory {peak / 1e6:.0f} MB",
    )
