"""Featured and incomplete graph representations.

A featured graph is a directed graph with a real feature vector per vertex.
An incomplete graph additionally partitions vertex pairs into normal edges,
unknown edges and non-edges; it stands for the set of featured graphs (its
"completions") obtained by resolving every unknown pair either way.
Non-edges are stored implicitly as the complement of normal and unknown.

Undirected graphs are stored symmetrically: both orientations of an edge are
present, and a status change always flips both orientations while counting
once toward perturbation budgets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

Pair = tuple[int, int]


class EdgeStatus(Enum):
    NORMAL = "normal"
    UNKNOWN = "unknown"
    NON = "non"


def _check_pair(pair: Pair, n: int) -> None:
    u, v = pair
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError(f"edge {pair!r} out of range for {n} vertices")


def _symmetric_closure(pairs: Iterable[Pair]) -> set[Pair]:
    out: set[Pair] = set()
    for u, v in pairs:
        out.add((u, v))
        out.add((v, u))
    return out


def canonical_pair(pair: Pair, directed: bool) -> Pair:
    """Canonical form of a pair: identity for directed, sorted for undirected."""
    if directed:
        return pair
    u, v = pair
    return (u, v) if u <= v else (v, u)


def orientations(pair: Pair, directed: bool) -> tuple[Pair, ...]:
    """Stored orientations of a logical pair (one for directed or self-loops)."""
    u, v = pair
    if directed or u == v:
        return (pair,)
    return (pair, (v, u))


@dataclass
class FeaturedGraph:
    """A graph ``(V, E, X)`` with dense integer vertices ``0..n-1``.

    ``features`` has shape ``(num_vertices, d0)``.  For undirected graphs the
    edge set is closed under pair reversal.
    """

    num_vertices: int
    directed: bool
    edges: set[Pair]
    features: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] != self.num_vertices:
            raise ValueError(
                f"features must have shape ({self.num_vertices}, d), "
                f"got {self.features.shape}"
            )
        for e in self.edges:
            _check_pair(e, self.num_vertices)
        if not self.directed:
            self.edges = _symmetric_closure(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def in_neighbors(self, v: int) -> list[int]:
        """Incoming neighbors of ``v``, sorted."""
        if not 0 <= v < self.num_vertices:
            raise ValueError(f"vertex {v} out of range")
        return sorted(u for (u, w) in self.edges if w == v)

    def has_edge(self, pair: Pair) -> bool:
        return pair in self.edges

    def canonical_edges(self) -> set[Pair]:
        return {canonical_pair(e, self.directed) for e in self.edges}

    def same_universe(self, other: "FeaturedGraph | IncompleteGraph") -> bool:
        return (
            self.num_vertices == other.num_vertices
            and self.directed == other.directed
            and self.features.shape == other.features.shape
        )


@dataclass
class IncompleteGraph:
    """Vertex pairs partitioned into normal / unknown / non (non implicit).

    Maintains incoming adjacency indexed by status plus outgoing adjacency
    over normal-or-unknown edges; the search mutates edge statuses in place
    through :meth:`set_status`.
    """

    num_vertices: int
    directed: bool
    normal_edges: set[Pair]
    unknown_edges: set[Pair]
    features: np.ndarray
    _in_normal: list[set[int]] = field(init=False, repr=False)
    _in_unknown: list[set[int]] = field(init=False, repr=False)
    _out_live: list[set[int]] = field(init=False, repr=False)
    adj_version: list[int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] != self.num_vertices:
            raise ValueError(
                f"features must have shape ({self.num_vertices}, d), "
                f"got {self.features.shape}"
            )
        if not self.directed:
            self.normal_edges = _symmetric_closure(self.normal_edges)
            self.unknown_edges = _symmetric_closure(self.unknown_edges)
        for e in itertools.chain(self.normal_edges, self.unknown_edges):
            _check_pair(e, self.num_vertices)
        if self.normal_edges & self.unknown_edges:
            raise ValueError("normal and unknown edge sets must be disjoint")
        n = self.num_vertices
        self._in_normal = [set() for _ in range(n)]
        self._in_unknown = [set() for _ in range(n)]
        self._out_live = [set() for _ in range(n)]
        self.adj_version = [0] * n
        for u, v in self.normal_edges:
            self._in_normal[v].add(u)
            self._out_live[u].add(v)
        for u, v in self.unknown_edges:
            self._in_unknown[v].add(u)
            self._out_live[u].add(v)

    # -- queries ----------------------------------------------------------

    @property
    def is_normal(self) -> bool:
        return not self.unknown_edges

    def status(self, pair: Pair) -> EdgeStatus:
        _check_pair(pair, self.num_vertices)
        if pair in self.normal_edges:
            return EdgeStatus.NORMAL
        if pair in self.unknown_edges:
            return EdgeStatus.UNKNOWN
        return EdgeStatus.NON

    def neighbors(self, v: int) -> tuple[set[int], set[int]]:
        """Incoming (normal, unknown) neighbor sets of ``v``."""
        if not 0 <= v < self.num_vertices:
            raise ValueError(f"vertex {v} out of range")
        return set(self._in_normal[v]), set(self._in_unknown[v])

    def in_normal(self, v: int) -> set[int]:
        return self._in_normal[v]

    def in_unknown(self, v: int) -> set[int]:
        return self._in_unknown[v]

    def out_live(self, v: int) -> set[int]:
        """Targets of live (normal or unknown) edges leaving ``v``."""
        return self._out_live[v]

    def canonical_unknown(self) -> list[Pair]:
        """Unknown pairs in canonical form, sorted."""
        return sorted({canonical_pair(e, self.directed) for e in self.unknown_edges})

    # -- mutation ---------------------------------------------------------

    def set_status(self, pair: Pair, status: EdgeStatus) -> None:
        """Set the status of a logical pair (both orientations if undirected)."""
        for u, v in orientations(pair, self.directed):
            self.adj_version[v] += 1
            self._drop(u, v)
            if status is EdgeStatus.NORMAL:
                self.normal_edges.add((u, v))
                self._in_normal[v].add(u)
                self._out_live[u].add(v)
            elif status is EdgeStatus.UNKNOWN:
                self.unknown_edges.add((u, v))
                self._in_unknown[v].add(u)
                self._out_live[u].add(v)

    def _drop(self, u: int, v: int) -> None:
        self.normal_edges.discard((u, v))
        self.unknown_edges.discard((u, v))
        self._in_normal[v].discard(u)
        self._in_unknown[v].discard(u)
        self._out_live[u].discard(v)

    def copy(self) -> "IncompleteGraph":
        return IncompleteGraph(
            self.num_vertices,
            self.directed,
            set(self.normal_edges),
            set(self.unknown_edges),
            self.features,
        )

    def same_universe(self, other: "FeaturedGraph | IncompleteGraph") -> bool:
        return (
            self.num_vertices == other.num_vertices
            and self.directed == other.directed
            and self.features.shape == other.features.shape
        )


def as_incomplete(g: FeaturedGraph) -> IncompleteGraph:
    """View a featured graph as a normal incomplete graph."""
    return IncompleteGraph(g.num_vertices, g.directed, set(g.edges), set(), g.features)


def _require_same_universe(a, b) -> None:
    if not a.same_universe(b):
        raise ValueError("graphs must share vertex count, directedness and feature shape")


def neighbors(h: IncompleteGraph, v: int) -> tuple[set[int], set[int]]:
    """Incoming normal and incoming unknown neighbors of ``v`` in ``h``."""
    return h.neighbors(v)


def refines(h2: IncompleteGraph, h1: IncompleteGraph) -> bool:
    """Whether ``h2`` is obtainable from ``h1`` by resolving unknown edges.

    Checks the three inclusions over the explicit sets: unknowns of ``h2``
    inside unknowns of ``h1``, normals of ``h2`` inside normal-or-unknown of
    ``h1``, and (for the implicit non-edges) normals of ``h1`` still
    normal-or-unknown in ``h2``.
    """
    _require_same_universe(h2, h1)
    if not h2.unknown_edges <= h1.unknown_edges:
        return False
    for e in h2.normal_edges:
        if e not in h1.normal_edges and e not in h1.unknown_edges:
            return False
    for e in h1.normal_edges:
        if e not in h2.normal_edges and e not in h2.unknown_edges:
            return False
    return True


def grounding(h: IncompleteGraph, g: FeaturedGraph) -> FeaturedGraph:
    """The completion of ``h`` closest to ``g``: unknowns copy ``g``'s status."""
    _require_same_universe(h, g)
    edges = set(h.normal_edges)
    edges.update(e for e in h.unknown_edges if e in g.edges)
    return FeaturedGraph(h.num_vertices, h.directed, edges, h.features)


def relaxation(g: FeaturedGraph, fragile: Iterable[Pair]) -> IncompleteGraph:
    """Make every fragile pair unknown; everything else keeps ``g``'s status."""
    fragile_set: set[Pair] = set()
    for pair in fragile:
        _check_pair(pair, g.num_vertices)
        fragile_set.update(orientations(canonical_pair(pair, g.directed), g.directed))
    normal = set(g.edges) - fragile_set
    return IncompleteGraph(g.num_vertices, g.directed, normal, fragile_set, g.features)


def distance(h1: IncompleteGraph | FeaturedGraph, h2: IncompleteGraph | FeaturedGraph) -> int:
    """Number of pairs normal in one graph and non-edge in the other.

    For undirected graphs each symmetric pair counts once, so a single edge
    conversion always has distance one.
    """
    a = as_incomplete(h1) if isinstance(h1, FeaturedGraph) else h1
    b = as_incomplete(h2) if isinstance(h2, FeaturedGraph) else h2
    _require_same_universe(a, b)
    d = a.directed
    a_norm = {canonical_pair(e, d) for e in a.normal_edges}
    a_live = a_norm | {canonical_pair(e, d) for e in a.unknown_edges}
    b_norm = {canonical_pair(e, d) for e in b.normal_edges}
    b_live = b_norm | {canonical_pair(e, d) for e in b.unknown_edges}
    count = sum(1 for e in a_norm if e not in b_live)
    count += sum(1 for e in b_norm if e not in a_live)
    return count


def completions(h: IncompleteGraph) -> Iterator[FeaturedGraph]:
    """All completions of ``h``, in lexicographic order of the unknown-pair
    resolution bitmask (bit set = resolved to a normal edge)."""
    unknown = h.canonical_unknown()
    base = set(h.normal_edges)
    for mask in range(1 << len(unknown)):
        edges = set(base)
        for i, pair in enumerate(unknown):
            if mask >> i & 1:
                edges.update(orientations(pair, h.directed))
        yield FeaturedGraph(h.num_vertices, h.directed, edges, h.features)


def in_perturbation_space(
    g: FeaturedGraph,
    candidate: FeaturedGraph,
    fragile: Iterable[Pair],
    global_budget: int,
    local_budget: int | None = None,
) -> bool:
    """Whether ``candidate`` is reachable from ``g`` by converting at most
    ``global_budget`` fragile pairs, at most ``local_budget`` per vertex.

    Per-vertex counting is over incoming conversions for directed graphs and
    over both endpoints for undirected ones.
    """
    _require_same_universe(g, candidate)
    fragile_set = {canonical_pair(p, g.directed) for p in fragile}
    diff = g.canonical_edges() ^ candidate.canonical_edges()
    if not diff <= fragile_set:
        return False
    if len(diff) > global_budget:
        return False
    if local_budget is not None:
        spent = [0] * g.num_vertices
        for u, v in diff:
            if g.directed:
                spent[v] += 1
            else:
                spent[v] += 1
                if u != v:
                    spent[u] += 1
        if any(s > local_budget for s in spent):
            return False
    return True
