"""The partial oracle: non-robustness tester plus bound propagator.

The oracle answers, for an incomplete graph ``h`` and a remaining budget
``d``, whether some completion of ``h`` within ``distance(h, G) + d`` of the
reference graph violates the robustness target (SAT), provably none does
(UNSAT), or neither can be established (UNKNOWN).  SAT detection evaluates
the grounding of ``h`` exactly; UNSAT detection uses propagated intervals.
The oracle is decisive on normal graphs and at ``d = 0``.

A :class:`BoundCache` owns the mutable incomplete graph together with three
incrementally maintained planes per layer: exact grounded features, interval
bounds, and (when reordering) per-vertex A-product intervals.  Edge
resolutions update only the affected cone of vertices, damped by
unchanged-value detection and pruned by distance to the target vertex; an
undo journal restores prior state bit-for-bit when the search backtracks.
"""

from __future__ import annotations

from collections import deque
from enum import Enum

import numpy as np

from .bounds import (
    BudgetContext,
    PreparedModel,
    dominance_certificate,
    exact_vertex_row,
    pooled_interval,
    product_rows,
    vertex_bound_rows,
)
from .graphs import EdgeStatus, FeaturedGraph, IncompleteGraph, Pair, canonical_pair
from .instance import RobustnessInstance
from .models import violates_scores

UNREACHABLE = 1 << 30


class OracleVerdict(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


def target_distances(h: IncompleteGraph, v0: int) -> np.ndarray:
    """Hop distance from every vertex to ``v0`` along live (normal or
    unknown) edges, following edge direction; ``UNREACHABLE`` if none."""
    dist = np.full(h.num_vertices, UNREACHABLE, dtype=np.int64)
    dist[v0] = 0
    queue = deque([v0])
    while queue:
        x = queue.popleft()
        for u in h.in_normal(x) | h.in_unknown(x):
            if dist[u] > dist[x] + 1:
                dist[u] = dist[x] + 1
                queue.append(u)
    return dist


def component_of(h: IncompleteGraph, v0: int) -> np.ndarray:
    """Membership mask of the connected component of ``v0`` over live edges,
    ignoring edge direction."""
    member = np.zeros(h.num_vertices, dtype=bool)
    member[v0] = True
    queue = deque([v0])
    while queue:
        x = queue.popleft()
        nbrs = h.in_normal(x) | h.in_unknown(x) | h.out_live(x)
        for u in nbrs:
            if not member[u]:
                member[u] = True
                queue.append(u)
    return member


class BoundCache:
    """Mutable search state: graph, grounded features, bounds, undo journal."""

    def __init__(
        self,
        instance: RobustnessInstance,
        h: IncompleteGraph | None = None,
        *,
        incremental: bool = True,
        reorder: bool = True,
        budget_tighten: bool = True,
        tighten_budget: int | None = None,
    ):
        self.instance = instance
        self.pm = PreparedModel(instance.model)
        self.g = instance.graph
        self.target = instance.target
        self.h = h if h is not None else instance.initial_relaxation()
        self.incremental = incremental
        self.reorder = reorder and self.pm.reorder_applies()
        n = self.h.num_vertices
        self.spent = [0] * n
        if budget_tighten:
            cap = instance.global_budget if tighten_budget is None else tighten_budget
            local = None
            if instance.local_budget is not None:
                local = np.full(n, instance.local_budget, dtype=np.int64)
            self.budget_ctx: BudgetContext | None = BudgetContext(cap, self.g, local)
        else:
            self.budget_ctx = None
        if self.target.is_node:
            self.dist_to_target: np.ndarray | None = target_distances(self.h, self.target.vertex)
            self.component = component_of(self.h, self.target.vertex)
        else:
            self.dist_to_target = None
            self.component = None
        L = self.pm.num_layers
        dims = self.pm.dims
        self.exact = [np.zeros((n, dims[i])) for i in range(L + 1)]
        self.up = [np.zeros((n, dims[i])) for i in range(L + 1)]
        self.lo = [np.zeros((n, dims[i])) for i in range(L + 1)]
        if self.reorder:
            self.prod_up = [np.zeros((n, dims[i + 1])) for i in range(L)]
            self.prod_lo = [np.zeros((n, dims[i + 1])) for i in range(L)]
        else:
            self.prod_up = self.prod_lo = None
        self._adj_memo: list[tuple | None] = [None] * n
        self.journal: list[tuple] = []
        self.rows_recomputed = [0] * (L + 1)
        self.last_report: dict[str, dict[int, list[int]]] = {}
        self._exact_revision = 0
        self._tester_memo: tuple[int, bool] | None = None
        self.refresh()

    # -- helpers -----------------------------------------------------------

    def _adjacency(self, v: int):
        """Per-vertex sorted adjacency and selection budget, memoized on the
        graph's per-vertex mutation counter."""
        version = self.h.adj_version[v]
        memo = self._adj_memo[v]
        if memo is not None and memo[0] == version:
            return memo
        normal = np.array(sorted(self.h.in_normal(v)), dtype=np.intp)
        unknown_sorted = sorted(self.h.in_unknown(v))
        unknown = np.array(unknown_sorted, dtype=np.intp)
        ground = normal
        if unknown_sorted:
            g_edges = self.g.edges
            extra = [u for u in unknown_sorted if (u, v) in g_edges]
            if extra:
                ground = np.array(sorted(set(normal.tolist()) | set(extra)), dtype=np.intp)
        sel = None
        if self.budget_ctx is not None and unknown_sorted:
            sel = self.budget_ctx.selection_budget(v, unknown_sorted)
        memo = (version, normal, unknown, ground, sel)
        self._adj_memo[v] = memo
        return memo

    def _ground_in_ids(self, v: int) -> np.ndarray:
        return self._adjacency(v)[3]

    def _out_ground(self, v: int):
        g_edges = self.g.edges
        h = self.h
        return [
            w for w in h.out_live(v)
            if (v, w) in h.normal_edges or (v, w) in g_edges
        ]

    def _compute_exact_row(self, li: int, v: int) -> np.ndarray:
        return exact_vertex_row(self.pm, li, self.exact[li], v, self._ground_in_ids(v))

    def _compute_bound_rows(self, li: int, v: int) -> tuple[np.ndarray, np.ndarray]:
        _, normal_ids, unknown_ids, _, sel = self._adjacency(v)
        return vertex_bound_rows(
            self.pm, li, self.up[li], self.lo[li], v,
            normal_ids, unknown_ids, sel, self.reorder,
            self.prod_up[li] if self.reorder else None,
            self.prod_lo[li] if self.reorder else None,
        )

    # -- full recomputation -------------------------------------------------

    def refresh(self) -> None:
        """Recompute every plane from scratch (also used at construction)."""
        x0 = self.h.features.astype(np.float64)
        self.exact[0][:] = x0
        self.up[0][:] = x0
        self.lo[0][:] = x0
        n = self.h.num_vertices
        for li in range(self.pm.num_layers):
            if self.reorder:
                for v in range(n):
                    pu, pl = product_rows(self.pm, li, self.up[li][v], self.lo[li][v])
                    self.prod_up[li][v] = pu
                    self.prod_lo[li][v] = pl
            for v in range(n):
                self.exact[li + 1][v] = self._compute_exact_row(li, v)
                bu, bl = self._compute_bound_rows(li, v)
                self.up[li + 1][v] = bu
                self.lo[li + 1][v] = bl
        self._exact_revision += 1
        self._tester_memo = None

    # -- journal ------------------------------------------------------------

    def mark(self) -> int:
        return len(self.journal)

    def undo_to(self, mark: int) -> None:
        """Restore the cache to the state at ``mark`` (bit-identical)."""
        if mark > len(self.journal):
            raise ValueError("journal underflow: mark beyond current state")
        while len(self.journal) > mark:
            entry = self.journal.pop()
            kind = entry[0]
            if kind == "edge":
                _, pair, old_status = entry
                self.h.set_status(pair, old_status)
            elif kind == "spent":
                _, v, old = entry
                self.spent[v] = old
            else:
                _, plane, layer, v, old_row = entry
                plane_arr = getattr(self, plane)
                plane_arr[layer][v] = old_row
                if plane == "exact":
                    self._exact_revision += 1
                    self._tester_memo = None

    def _journal_row(self, plane: str, layer: int, v: int) -> None:
        arr = getattr(self, plane)
        self.journal.append(("row", plane, layer, v, arr[layer][v].copy()))

    # -- edge application ----------------------------------------------------

    def apply_edge(self, pair: Pair, new_status: EdgeStatus) -> int:
        """Resolve an unknown pair and incrementally update affected rows.

        Returns the journal mark taken before the application so callers can
        undo this edge (and everything after it) with :meth:`undo_to`.
        """
        pair = canonical_pair(pair, self.h.directed)
        if self.h.status(pair) is not EdgeStatus.UNKNOWN:
            raise ValueError(f"edge {pair!r} is not unknown")
        if new_status is EdgeStatus.UNKNOWN:
            raise ValueError("cannot resolve an edge to unknown")
        mark = len(self.journal)
        g_has = pair in self.g.edges
        opposite = (new_status is EdgeStatus.NORMAL) != g_has
        self.journal.append(("edge", pair, EdgeStatus.UNKNOWN))
        self.h.set_status(pair, new_status)
        heads = self.affected_heads(pair)
        if opposite:
            for w in heads:
                self.journal.append(("spent", w, self.spent[w]))
                self.spent[w] += 1
        if self.incremental:
            self._update_cone(heads, exact_changed=opposite)
        return mark

    def affected_heads(self, pair: Pair) -> list[int]:
        u, v = pair
        if self.h.directed:
            return [v]
        return [v] if u == v else sorted((u, v))

    def _update_cone(self, heads: list[int], exact_changed: bool) -> None:
        L = self.pm.num_layers
        report: dict[str, dict[int, list[int]]] = {"exact": {}, "bounds": {}}
        # the heads' neighborhoods changed structurally, so their aggregation
        # inputs differ at every layer: keep them dirty throughout
        exact_heads = set(heads) if exact_changed else set()
        exact_front = set(exact_heads)
        bounds_front = set(heads)
        for layer in range(1, L + 1):
            if self.dist_to_target is not None:
                limit = L - layer
                ex_rec = sorted(w for w in exact_front if self.dist_to_target[w] <= limit)
                bd_rec = sorted(w for w in bounds_front if self.dist_to_target[w] <= limit)
            else:
                ex_rec = sorted(exact_front)
                bd_rec = sorted(bounds_front)
            exact_changed_set: set[int] = set()
            bounds_changed_set: set[int] = set()
            for v in ex_rec:
                new_row = self._compute_exact_row(layer - 1, v)
                self.rows_recomputed[layer] += 1
                if not np.array_equal(new_row, self.exact[layer][v]):
                    self._journal_row("exact", layer, v)
                    self.exact[layer][v] = new_row
                    exact_changed_set.add(v)
                    self._exact_revision += 1
                    self._tester_memo = None
            for v in bd_rec:
                new_up, new_lo = self._compute_bound_rows(layer - 1, v)
                self.rows_recomputed[layer] += 1
                if not (
                    np.array_equal(new_up, self.up[layer][v])
                    and np.array_equal(new_lo, self.lo[layer][v])
                ):
                    self._journal_row("up", layer, v)
                    self._journal_row("lo", layer, v)
                    self.up[layer][v] = new_up
                    self.lo[layer][v] = new_lo
                    bounds_changed_set.add(v)
                    if self.reorder and layer < L:
                        self._journal_row("prod_up", layer, v)
                        self._journal_row("prod_lo", layer, v)
                        pu, pl = product_rows(self.pm, layer, new_up, new_lo)
                        self.prod_up[layer][v] = pu
                        self.prod_lo[layer][v] = pl
            report["exact"][layer] = ex_rec
            report["bounds"][layer] = bd_rec
            if layer == L:
                break
            exact_front = set(exact_changed_set) | exact_heads
            for v in exact_changed_set:
                exact_front.update(self._out_ground(v))
            bounds_front = set(bounds_changed_set) | set(heads)
            for v in bounds_changed_set:
                bounds_front.update(self.h.out_live(v))
            if not exact_front and not bounds_front:
                for rest in range(layer + 1, L + 1):
                    report["exact"][rest] = []
                    report["bounds"][rest] = []
                break
        self.last_report = report

    # -- oracle --------------------------------------------------------------

    def grounding_scores(self) -> np.ndarray:
        if self.target.is_node:
            return self.exact[-1][self.target.vertex]
        return self.pm.pool_C @ self.exact[-1].sum(axis=0) + self.pm.pool_b

    def tester_violates(self) -> bool:
        """Whether the grounding of ``h`` to the reference graph violates the
        target (exact evaluation of the cached grounded plane)."""
        if self._tester_memo is not None and self._tester_memo[0] == self._exact_revision:
            return self._tester_memo[1]
        value = violates_scores(self.grounding_scores(), self.target)
        self._tester_memo = (self._exact_revision, value)
        return value

    def bounds_certify(self) -> bool:
        if self.target.is_node:
            up = self.up[-1][self.target.vertex]
            lo = self.lo[-1][self.target.vertex]
        else:
            up, lo = pooled_interval(self.pm, self.up[-1], self.lo[-1])
        return dominance_certificate(up, lo, self.target)

    def grounding_graph(self) -> FeaturedGraph:
        """Materialize the grounding of the current ``h`` (the SAT witness)."""
        edges = set(self.h.normal_edges)
        edges.update(e for e in self.h.unknown_edges if e in self.g.edges)
        return FeaturedGraph(self.h.num_vertices, self.h.directed, edges, self.h.features)

    def local_exhausted(self, v: int) -> bool:
        delta = self.instance.local_budget
        return delta is not None and self.spent[v] >= delta

    def oracle_call(self, d: int) -> OracleVerdict:
        """The partial oracle for the current ``h`` and remaining budget ``d``."""
        if d < 0:
            raise ValueError("budget must be nonnegative")
        if not self.incremental:
            self.refresh()
        if self.tester_violates():
            return OracleVerdict.SAT
        if self.h.is_normal or d == 0:
            return OracleVerdict.UNSAT
        if self.bounds_certify():
            return OracleVerdict.UNSAT
        return OracleVerdict.UNKNOWN


def oracle_call(cache: BoundCache, d: int) -> OracleVerdict:
    return cache.oracle_call(d)


def apply_edge(cache: BoundCache, edge: Pair, new_status: EdgeStatus) -> int:
    return cache.apply_edge(edge, new_status)


def undo_edge(cache: BoundCache, mark: int) -> None:
    cache.undo_to(mark)
