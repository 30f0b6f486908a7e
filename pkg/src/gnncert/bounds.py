"""Interval bound propagation over incomplete graphs.

Computes, per vertex and layer, lower/upper feature bounds valid for every
completion of an incomplete graph (optionally only for completions reachable
within a perturbation budget).  Aggregation bounds treat each feature entry
independently; the neighbor multisets are split into values coming from
normal neighbors (always present) and from unknown neighbors (adversary's
choice).

Two refinements over the plain propagation are supported:

* reordering (sum/mean only): bound the per-neighbor matrix product first and
  aggregate the product intervals, which preserves cross-entry dependencies
  and provably tightens both bounds;
* budget tightening: restrict the adversary's selections of unknown neighbors
  to those with at most ``remaining`` deviations from the reference graph.

All row-level computations are shared with the incremental oracle cache so
that incremental and from-scratch results are bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graphs import FeaturedGraph, IncompleteGraph
from .models import Aggregation, GnnModel, TaskTarget


def relax_mat(A: np.ndarray, upper: np.ndarray, lower: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sound interval image of ``A @ v`` for ``lower <= v <= upper``.

    Returns ``(upper_out, lower_out)`` with
    ``upper_out = A+ @ upper + A- @ lower`` and symmetrically for the lower
    bound, where ``A+``/``A-`` are the entrywise positive/negative parts.
    """
    A = np.asarray(A, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    if A.ndim != 2 or upper.shape != (A.shape[1],) or lower.shape != (A.shape[1],):
        raise ValueError("shape mismatch between matrix and bound vectors")
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    pos = np.maximum(A, 0.0)
    neg = np.minimum(A, 0.0)
    return pos @ upper + neg @ lower, pos @ lower + neg @ upper


def _relax_rows(pos: np.ndarray, neg: np.ndarray, up: np.ndarray, lo: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return pos @ up + neg @ lo, pos @ lo + neg @ up


@dataclass
class SelectionBudget:
    """Per-vertex restriction on unknown-neighbor selections.

    ``remaining`` caps how many unknown edges may deviate from the reference
    graph; ``in_target`` marks, for each unknown-neighbor row, whether that
    edge is present in the reference graph.
    """

    remaining: int
    in_target: np.ndarray

    def __post_init__(self) -> None:
        self.in_target = np.asarray(self.in_target, dtype=bool)
        if self.remaining < 0:
            raise ValueError("remaining budget must be nonnegative")


def _sum_bounds(n_up, n_lo, u_up, u_lo, dim, sel: SelectionBudget | None):
    base_up = n_up.sum(axis=0) if n_up.shape[0] else np.zeros(dim)
    base_lo = n_lo.sum(axis=0) if n_lo.shape[0] else np.zeros(dim)
    k2 = u_up.shape[0]
    if k2 == 0:
        return base_up, base_lo
    if sel is None:
        return (
            base_up + np.maximum(u_up, 0.0).sum(axis=0),
            base_lo + np.minimum(u_lo, 0.0).sum(axis=0),
        )
    mask = sel.in_target
    r = min(sel.remaining, k2)
    # baseline keeps exactly the reference selection; each deviation (drop an
    # in-reference term or add an out-of-reference term) contributes a gain
    base_up = base_up + (u_up[mask].sum(axis=0) if mask.any() else 0.0)
    base_lo = base_lo + (u_lo[mask].sum(axis=0) if mask.any() else 0.0)
    gains = np.where(mask[:, None], -u_up, u_up)
    losses = np.where(mask[:, None], -u_lo, u_lo)
    if r > 0:
        top_gains = -np.sort(-gains, axis=0)[:r]
        base_up = base_up + np.maximum(top_gains, 0.0).sum(axis=0)
        bottom_losses = np.sort(losses, axis=0)[:r]
        base_lo = base_lo + np.minimum(bottom_losses, 0.0).sum(axis=0)
    return base_up, base_lo


def _max_bounds(n_up, n_lo, u_up, u_lo, dim, sel: SelectionBudget | None):
    k1 = n_up.shape[0]
    k2 = u_up.shape[0]
    if k1:
        upper = n_up.max(axis=0)
        if k2:
            upper = np.maximum(upper, u_up.max(axis=0))
        lower = n_lo.max(axis=0)
        return upper, lower
    # no normal neighbors: the empty selection (value 0) is always possible
    upper = np.maximum(u_up.max(axis=0), 0.0) if k2 else np.zeros(dim)
    if k2 == 0:
        return upper, np.zeros(dim)
    if sel is not None:
        m = int(sel.in_target.sum())
        if m > sel.remaining:
            # adversary can drop at most `remaining` kept edges, so the
            # (remaining+1)-th largest lower value among them survives
            kept_desc = -np.sort(-u_lo[sel.in_target], axis=0)
            return upper, kept_desc[sel.remaining]
    return upper, np.minimum(u_lo.min(axis=0), 0.0)


def _mean_candidates_up(base, sorted_desc, k1):
    k2 = sorted_desc.shape[0]
    pref = np.cumsum(sorted_desc, axis=0)
    counts = (k1 + np.arange(1, k2 + 1, dtype=np.float64))[:, None]
    cand = (base + pref) / counts
    best = cand.max(axis=0)
    empty = base / k1 if k1 else np.zeros_like(base)
    return np.maximum(best, empty)


def _mean_candidates_lo(base, sorted_asc, k1):
    k2 = sorted_asc.shape[0]
    pref = np.cumsum(sorted_asc, axis=0)
    counts = (k1 + np.arange(1, k2 + 1, dtype=np.float64))[:, None]
    cand = (base + pref) / counts
    best = cand.min(axis=0)
    empty = base / k1 if k1 else np.zeros_like(base)
    return np.minimum(best, empty)


def _mean_bounds(n_up, n_lo, u_up, u_lo, dim, sel: SelectionBudget | None):
    k1 = n_up.shape[0]
    base_up = n_up.sum(axis=0) if k1 else np.zeros(dim)
    base_lo = n_lo.sum(axis=0) if k1 else np.zeros(dim)
    k2 = u_up.shape[0]
    if k2 == 0:
        if k1 == 0:
            return np.zeros(dim), np.zeros(dim)
        return base_up / k1, base_lo / k1
    if sel is None:
        upper = _mean_candidates_up(base_up, -np.sort(-u_up, axis=0), k1)
        lower = _mean_candidates_lo(base_lo, np.sort(u_lo, axis=0), k1)
        return upper, lower
    mask = sel.in_target
    m_in = int(mask.sum())
    m_out = k2 - m_in
    in_up = np.sort(u_up[mask], axis=0)          # ascending: drop smallest first
    out_up = -np.sort(-u_up[~mask], axis=0)      # descending: add largest first
    in_lo = -np.sort(-u_lo[mask], axis=0)        # descending: drop largest first
    out_lo = np.sort(u_lo[~mask], axis=0)        # ascending: add smallest first
    in_up_pref = np.vstack([np.zeros(dim), np.cumsum(in_up, axis=0)]) if m_in else np.zeros((1, dim))
    out_up_pref = np.vstack([np.zeros(dim), np.cumsum(out_up, axis=0)]) if m_out else np.zeros((1, dim))
    in_lo_pref = np.vstack([np.zeros(dim), np.cumsum(in_lo, axis=0)]) if m_in else np.zeros((1, dim))
    out_lo_pref = np.vstack([np.zeros(dim), np.cumsum(out_lo, axis=0)]) if m_out else np.zeros((1, dim))
    total_in_up = in_up_pref[m_in]
    total_in_lo = in_lo_pref[m_in]
    upper = np.full(dim, -np.inf)
    lower = np.full(dim, np.inf)
    for r in range(min(sel.remaining, m_in) + 1):
        for a in range(min(sel.remaining - r, m_out) + 1):
            cnt = k1 + m_in - r + a
            if cnt == 0:
                cand_up = np.zeros(dim)
                cand_lo = np.zeros(dim)
            else:
                cand_up = (base_up + (total_in_up - in_up_pref[r]) + out_up_pref[a]) / cnt
                cand_lo = (base_lo + (total_in_lo - in_lo_pref[r]) + out_lo_pref[a]) / cnt
            upper = np.maximum(upper, cand_up)
            lower = np.minimum(lower, cand_lo)
    return upper, lower


def aggr_bounds(
    aggregation: Aggregation,
    normal_upper: np.ndarray,
    normal_lower: np.ndarray,
    unknown_upper: np.ndarray,
    unknown_lower: np.ndarray,
    budget: SelectionBudget | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise bounds on ``aggr(normal ∪ T)`` over admissible selections ``T``
    of unknown neighbors (all selections when ``budget`` is ``None``).

    Inputs are ``(k, d)`` arrays of per-neighbor bound rows.  Returns
    ``(upper, lower)`` of shape ``(d,)``.
    """
    raw = [
        np.asarray(a, dtype=np.float64)
        for a in (normal_upper, normal_lower, unknown_upper, unknown_lower)
    ]
    raw = [a.reshape(1, -1) if a.ndim == 1 and a.size else a for a in raw]
    dims = {a.shape[1] for a in raw if a.ndim == 2 and a.shape[1] > 0}
    if len(dims) > 1:
        raise ValueError("neighbor bound rows disagree on dimension")
    dim = dims.pop() if dims else 1
    n_up, n_lo, u_up, u_lo = (a if a.size else np.zeros((0, dim)) for a in raw)
    if budget is not None and budget.in_target.shape[0] != u_up.shape[0]:
        raise ValueError("budget mask length must match unknown row count")
    if aggregation is Aggregation.SUM:
        return _sum_bounds(n_up, n_lo, u_up, u_lo, dim, budget)
    if aggregation is Aggregation.MAX:
        return _max_bounds(n_up, n_lo, u_up, u_lo, dim, budget)
    return _mean_bounds(n_up, n_lo, u_up, u_lo, dim, budget)


# -- prepared models -------------------------------------------------------


@dataclass
class PreparedLayer:
    C_pos: np.ndarray
    C_neg: np.ndarray
    A_pos: np.ndarray
    A_neg: np.ndarray
    C: np.ndarray
    A: np.ndarray
    b: np.ndarray


class PreparedModel:
    """Model with per-layer positive/negative matrix splits precomputed."""

    def __init__(self, model: GnnModel):
        self.model = model
        self.aggregation = model.aggregation
        self.dims = model.dims
        self.layers = [
            PreparedLayer(
                np.maximum(l.C, 0.0), np.minimum(l.C, 0.0),
                np.maximum(l.A, 0.0), np.minimum(l.A, 0.0),
                l.C, l.A, l.b,
            )
            for l in model.layers
        ]
        if model.pooling is not None:
            self.pool_pos = np.maximum(model.pooling.C, 0.0)
            self.pool_neg = np.minimum(model.pooling.C, 0.0)
            self.pool_C = model.pooling.C
            self.pool_b = model.pooling.b
        else:
            self.pool_pos = None

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def reorder_applies(self) -> bool:
        return self.aggregation in (Aggregation.SUM, Aggregation.MEAN)


@dataclass
class BudgetContext:
    """Budget information for tightened propagation.

    ``remaining_global`` caps total deviations from ``target_graph``;
    ``remaining_local``, when given, caps per-vertex deviations (indexed by
    vertex).  Per-vertex tightening assumes the full global budget may be
    spent locally, which over-approximates the joint constraint and stays
    sound.
    """

    remaining_global: int
    target_graph: FeaturedGraph
    remaining_local: np.ndarray | None = None

    def cap_for(self, v: int) -> int:
        if self.remaining_local is None:
            return self.remaining_global
        return min(self.remaining_global, int(self.remaining_local[v]))

    def selection_budget(self, v: int, unknown_sorted: list[int]) -> SelectionBudget:
        edges = self.target_graph.edges
        mask = np.fromiter(
            ((u, v) in edges for u in unknown_sorted), count=len(unknown_sorted), dtype=bool
        )
        return SelectionBudget(self.cap_for(v), mask)


def vertex_bound_rows(
    pm: PreparedModel,
    layer_index: int,
    prev_up: np.ndarray,
    prev_lo: np.ndarray,
    v: int,
    normal_ids: np.ndarray,
    unknown_ids: np.ndarray,
    sel: SelectionBudget | None,
    reorder: bool,
    prod_up: np.ndarray | None = None,
    prod_lo: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Bound rows for one vertex at layer ``layer_index + 1``.

    With ``reorder`` set (sum/mean), ``prod_up``/``prod_lo`` must hold the
    per-neighbor interval images of the A-product at the previous layer and
    the aggregation runs over those rows.
    """
    layer = pm.layers[layer_index]
    c_up, c_lo = _relax_rows(layer.C_pos, layer.C_neg, prev_up[v], prev_lo[v])
    if reorder and pm.reorder_applies():
        s_up, s_lo = aggr_bounds(
            pm.aggregation,
            prod_up[normal_ids], prod_lo[normal_ids],
            prod_up[unknown_ids], prod_lo[unknown_ids],
            sel,
        )
        pre_up = c_up + s_up + layer.b
        pre_lo = c_lo + s_lo + layer.b
    else:
        s_up, s_lo = aggr_bounds(
            pm.aggregation,
            prev_up[normal_ids], prev_lo[normal_ids],
            prev_up[unknown_ids], prev_lo[unknown_ids],
            sel,
        )
        a_up, a_lo = _relax_rows(layer.A_pos, layer.A_neg, s_up, s_lo)
        pre_up = c_up + a_up + layer.b
        pre_lo = c_lo + a_lo + layer.b
    return np.maximum(pre_up, 0.0), np.maximum(pre_lo, 0.0)


def product_rows(pm: PreparedModel, layer_index: int, up_row: np.ndarray, lo_row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interval image of ``A(layer_index+1) @ x`` for one vertex row."""
    layer = pm.layers[layer_index]
    return _relax_rows(layer.A_pos, layer.A_neg, up_row, lo_row)


def exact_vertex_row(
    pm: PreparedModel,
    layer_index: int,
    prev: np.ndarray,
    v: int,
    neighbor_ids: np.ndarray,
) -> np.ndarray:
    """Exact forward row for one vertex on a normal graph."""
    layer = pm.layers[layer_index]
    rows = prev[neighbor_ids]
    if rows.shape[0] == 0:
        agg = np.zeros(pm.dims[layer_index])
    elif pm.aggregation is Aggregation.SUM:
        agg = rows.sum(axis=0)
    elif pm.aggregation is Aggregation.MAX:
        agg = rows.max(axis=0)
    else:
        agg = rows.sum(axis=0) / rows.shape[0]
    return np.maximum(layer.C @ prev[v] + layer.A @ agg + layer.b, 0.0)


@dataclass
class BoundState:
    """Per-layer ``(n, d_l)`` bound arrays; layer 0 is degenerate at X."""

    upper: list[np.ndarray]
    lower: list[np.ndarray]

    def dump_json(self) -> str:
        return json.dumps(
            {
                "upper": [a.tolist() for a in self.upper],
                "lower": [a.tolist() for a in self.lower],
            }
        )


def propagate(
    model: GnnModel | PreparedModel,
    h: IncompleteGraph,
    budget: BudgetContext | None = None,
    reorder: bool = False,
) -> BoundState:
    """Bound propagation over all completions of ``h`` (budget-feasible ones
    when ``budget`` is given).  Layer-0 bounds are degenerate at the features."""
    pm = model if isinstance(model, PreparedModel) else PreparedModel(model)
    if h.features.shape[1] != pm.dims[0]:
        raise ValueError("feature dimension does not match the model")
    n = h.num_vertices
    normal_ids = [np.array(sorted(h.in_normal(v)), dtype=np.intp) for v in range(n)]
    unknown_sorted = [sorted(h.in_unknown(v)) for v in range(n)]
    unknown_ids = [np.array(u, dtype=np.intp) for u in unknown_sorted]
    sels = [None] * n
    if budget is not None:
        sels = [
            budget.selection_budget(v, unknown_sorted[v]) if unknown_sorted[v] else None
            for v in range(n)
        ]
    x0 = h.features.astype(np.float64)
    upper = [x0.copy()]
    lower = [x0.copy()]
    use_reorder = reorder and pm.reorder_applies()
    for li in range(pm.num_layers):
        prev_up, prev_lo = upper[-1], lower[-1]
        prod_up = prod_lo = None
        if use_reorder:
            prod_up = np.empty((n, pm.dims[li + 1]))
            prod_lo = np.empty((n, pm.dims[li + 1]))
            for v in range(n):
                prod_up[v], prod_lo[v] = product_rows(pm, li, prev_up[v], prev_lo[v])
        up = np.empty((n, pm.dims[li + 1]))
        lo = np.empty((n, pm.dims[li + 1]))
        for v in range(n):
            up[v], lo[v] = vertex_bound_rows(
                pm, li, prev_up, prev_lo, v,
                normal_ids[v], unknown_ids[v], sels[v],
                use_reorder, prod_up, prod_lo,
            )
        upper.append(up)
        lower.append(lo)
    return BoundState(upper=upper, lower=lower)


def pooled_interval(pm: PreparedModel, upper_final: np.ndarray, lower_final: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interval of the graph-level readout given final-layer bound arrays."""
    if pm.pool_pos is None:
        raise ValueError("model has no pooling head")
    s_up = upper_final.sum(axis=0)
    s_lo = lower_final.sum(axis=0)
    up, lo = _relax_rows(pm.pool_pos, pm.pool_neg, s_up, s_lo)
    return up + pm.pool_b, lo + pm.pool_b


def dominance_certificate(up_scores: np.ndarray, lo_scores: np.ndarray, target: TaskTarget) -> bool:
    """Whether the defended class provably beats every admissible competitor:
    each competitor's upper bound lies strictly below the defended class's
    lower bound."""
    c = target.class_index - 1
    if target.weak_target is not None:
        return bool(up_scores[target.weak_target - 1] < lo_scores[c])
    threshold = lo_scores[c]
    for j, up in enumerate(up_scores):
        if j != c and not up < threshold:
            return False
    return True


def decide_unsat(
    state: BoundState,
    model: GnnModel | PreparedModel,
    target: TaskTarget,
) -> bool:
    """Whether the propagated bounds certify that no completion can make any
    competitor beat the defended class."""
    pm = model if isinstance(model, PreparedModel) else PreparedModel(model)
    if target.is_node:
        up = state.upper[-1][target.vertex]
        lo = state.lower[-1][target.vertex]
    else:
        up, lo = pooled_interval(pm, state.upper[-1], state.lower[-1])
    return dominance_certificate(up, lo, target)
