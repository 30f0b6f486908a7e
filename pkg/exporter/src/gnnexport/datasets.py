"""Dataset loading and synthetic dataset generation.

Datasets are ``.npz`` archives.  Node-classification datasets hold one graph:
``features (N, d)``, ``edges (E, 2)``, ``directed`` (bool scalar) and
optionally ``labels (N,)``.  Graph-classification datasets additionally hold
``graph_id (N,)`` assigning each vertex to a graph; edges never cross graphs.
Citation-style data is directed, molecule-style data undirected.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class LoadedGraph:
    features: np.ndarray
    edges: np.ndarray
    directed: bool
    label: int | None = None


def load_dataset(path: str | Path) -> list[LoadedGraph]:
    """Load a dataset archive into one graph (node data) or many (graph data)."""
    with np.load(Path(path), allow_pickle=False) as data:
        features = np.asarray(data["features"], dtype=np.float64)
        edges = np.asarray(data["edges"], dtype=np.int64).reshape(-1, 2)
        directed = bool(np.asarray(data["directed"]).item())
        if "graph_id" not in data:
            return [LoadedGraph(features, edges, directed)]
        graph_id = np.asarray(data["graph_id"], dtype=np.int64)
        labels = data["labels"] if "labels" in data else None
        graphs = []
        for gid in np.unique(graph_id):
            mask = graph_id == gid
            index_of = -np.ones(len(graph_id), dtype=np.int64)
            index_of[mask] = np.arange(int(mask.sum()))
            keep = mask[edges[:, 0]] & mask[edges[:, 1]]
            local_edges = index_of[edges[keep]]
            label = int(labels[gid]) if labels is not None else None
            graphs.append(LoadedGraph(features[mask], local_edges, directed, label))
        return graphs


def make_citation_dataset(
    path: str | Path, *, num_nodes: int = 60, feature_dim: int = 8, seed: int = 0
) -> Path:
    """Synthetic citation-style network: directed, block-structured links."""
    rng = np.random.default_rng(seed)
    blocks = rng.integers(0, 3, num_nodes)
    features = rng.normal(0, 1, (num_nodes, feature_dim)) + blocks[:, None] * 0.5
    edges = []
    for v in range(num_nodes):
        cites = rng.integers(1, 4)
        same = np.flatnonzero(blocks == blocks[v])
        for _ in range(int(cites)):
            u = int(rng.choice(same)) if rng.random() < 0.7 else int(rng.integers(num_nodes))
            if u != v:
                edges.append((u, v))
    path = Path(path)
    np.savez(
        path,
        features=features,
        edges=np.array(sorted(set(edges)), dtype=np.int64),
        directed=np.array(True),
        labels=blocks.astype(np.int64),
    )
    return path


def make_molecule_dataset(
    path: str | Path, *, num_graphs: int = 5, feature_dim: int = 4, seed: int = 0
) -> Path:
    """Synthetic molecule-style dataset: small undirected graphs."""
    rng = np.random.default_rng(seed)
    features, edges, graph_id, labels = [], [], [], []
    offset = 0
    for gid in range(num_graphs):
        n = int(rng.integers(4, 9))
        feats = rng.normal(0, 1, (n, feature_dim))
        ring = [(offset + i, offset + (i + 1) % n) for i in range(n)]
        extra = [
            (offset + int(rng.integers(n)), offset + int(rng.integers(n)))
            for _ in range(int(rng.integers(0, 3)))
        ]
        for u, v in ring + extra:
            if u != v:
                edges.append((u, v))
        features.append(feats)
        graph_id.extend([gid] * n)
        labels.append(int(rng.integers(0, 2)))
        offset += n
    path = Path(path)
    np.savez(
        path,
        features=np.vstack(features),
        edges=np.array(sorted(set(edges)), dtype=np.int64),
        directed=np.array(False),
        graph_id=np.array(graph_id, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
    )
    return path
