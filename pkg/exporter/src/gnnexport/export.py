"""Checkpoint and dataset conversion to the verifier's interchange files.

A checkpoint is decomposed per layer into a self-transform matrix C, a
neighbor-transform matrix A and a bias b via a layer-extraction map from
state-dict keys; the default map matches :mod:`gnnexport.torch_models`
naming.  Every export is gated by a forward-equivalence check: the exported
weights, evaluated under the interchange-file semantics, must reproduce the
source model's outputs on random probe inputs within an absolute tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .datasets import LoadedGraph, load_dataset
from .torch_models import MessagePassingGNN

FORWARD_TOLERANCE = 1e-5


@dataclass
class ExportJob:
    """One conversion task.

    ``source_module`` optionally holds the live source model; when present
    the equivalence gate runs against it, which also catches a misdeclared
    aggregation tag (a bare state dict cannot, since the reference model is
    then reconstructed under the declared tag).
    """

    checkpoint: str | Path
    aggregation: str
    output: str | Path
    task: str = "node"
    graph_classes: int | None = None
    layer_map: list[dict] | None = None
    pooling_map: dict | None = None
    source_module: torch.nn.Module | None = None
    probe_inputs: int = 10
    seed: int = 0


def default_layer_map(state: dict) -> tuple[list[dict], dict | None]:
    """Extraction map for checkpoints in the reference naming convention."""
    layers = []
    i = 0
    while f"layers.{i}.self_lin.weight" in state:
        layers.append(
            {
                "C": f"layers.{i}.self_lin.weight",
                "A": f"layers.{i}.nbr_lin.weight",
                "b": f"layers.{i}.self_lin.bias",
            }
        )
        i += 1
    if not layers:
        raise ValueError(
            "checkpoint does not follow the default layer naming; pass a layer map"
        )
    pooling = None
    if "readout.weight" in state:
        pooling = {"C": "readout.weight", "b": "readout.bias"}
    return layers, pooling


def _tensor(state: dict, key: str, layer: str) -> np.ndarray:
    if key not in state:
        raise ValueError(f"cannot map {layer}: checkpoint has no tensor {key!r}")
    return np.asarray(state[key].detach().cpu().numpy(), dtype=np.float64)


def decompose_checkpoint(job: ExportJob) -> dict:
    """State dict -> interchange model structure (validated shapes)."""
    state = torch.load(job.checkpoint, map_location="cpu", weights_only=True)
    if not isinstance(state, dict):
        raise ValueError("checkpoint must hold a state dict")
    if "state_dict" in state:
        state = state["state_dict"]
    layer_map = job.layer_map
    pooling_map = job.pooling_map
    if layer_map is None:
        layer_map, inferred_pooling = default_layer_map(state)
        if pooling_map is None:
            pooling_map = inferred_pooling
    layers = []
    dims = None
    for i, spec in enumerate(layer_map):
        C = _tensor(state, spec["C"], f"layer {i}")
        A = _tensor(state, spec["A"], f"layer {i}")
        b = _tensor(state, spec["b"], f"layer {i}")
        if C.shape != A.shape or b.shape != (C.shape[0],):
            raise ValueError(f"layer {i}: C {C.shape}, A {A.shape}, b {b.shape} do not align")
        if dims is None:
            dims = [C.shape[1]]
        elif C.shape[1] != dims[-1]:
            raise ValueError(
                f"layer {i}: input dim {C.shape[1]} breaks the chain at {dims[-1]}"
            )
        dims.append(C.shape[0])
        layers.append({"C": C.tolist(), "A": A.tolist(), "b": b.tolist()})
    pooling = None
    if pooling_map is not None:
        C = _tensor(state, pooling_map["C"], "pooling")
        b = _tensor(state, pooling_map["b"], "pooling")
        if C.shape[1] != dims[-1] or b.shape != (C.shape[0],):
            raise ValueError(f"pooling: C {C.shape}, b {b.shape} do not align with dL={dims[-1]}")
        pooling = {"C": C.tolist(), "b": b.tolist()}
    if job.task == "graph" and pooling is None:
        raise ValueError("graph task requires a pooling head in the checkpoint")
    return {
        "dims": [int(d) for d in dims],
        "aggregation": job.aggregation,
        "layers": layers,
        "pooling": pooling,
    }


# -- independent evaluation of the interchange semantics ----------------------


def file_semantics_forward(model_data: dict, features: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Evaluate an interchange model on a graph exactly as specified for the
    verifier: incoming-neighbor aggregation, zero vectors for empty
    neighborhoods, ReLU layers, optional sum-pooling readout."""
    n = features.shape[0]
    incoming = [[] for _ in range(n)]
    for u, v in edges:
        incoming[int(v)].append(int(u))
    x = np.asarray(features, dtype=np.float64)
    aggregation = model_data["aggregation"]
    for layer in model_data["layers"]:
        C = np.asarray(layer["C"])
        A = np.asarray(layer["A"])
        b = np.asarray(layer["b"])
        nxt = np.empty((n, C.shape[0]))
        for v in range(n):
            nbrs = incoming[v]
            if not nbrs:
                agg = np.zeros(x.shape[1])
            elif aggregation == "sum":
                agg = x[nbrs].sum(axis=0)
            elif aggregation == "max":
                agg = x[nbrs].max(axis=0)
            else:
                agg = x[nbrs].mean(axis=0)
            nxt[v] = np.maximum(C @ x[v] + A @ agg + b, 0.0)
        x = nxt
    if model_data["pooling"] is not None:
        pool = model_data["pooling"]
        return np.asarray(pool["C"]) @ x.sum(axis=0) + np.asarray(pool["b"])
    return x


def forward_equivalence_gap(job: ExportJob, model_data: dict) -> float:
    """Largest per-entry deviation between the source model and the exported
    weights under file semantics, over random probe graphs."""
    dims = model_data["dims"]
    if job.source_module is not None:
        source = job.source_module
    else:
        state = torch.load(job.checkpoint, map_location="cpu", weights_only=True)
        if "state_dict" in state:
            state = state["state_dict"]
        source = MessagePassingGNN(
            dims,
            job.aggregation,
            num_graph_classes=(
                len(model_data["pooling"]["b"]) if model_data["pooling"] is not None else None
            ),
        )
        source.load_state_dict(state)
    source.eval()
    dtype = next(source.parameters()).dtype
    rng = np.random.default_rng(job.seed)
    worst = 0.0
    for _ in range(job.probe_inputs):
        n = int(rng.integers(3, 9))
        features = rng.normal(0, 1, (n, dims[0]))
        pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
        edges = np.array([p for p in pairs if rng.random() < 0.4], dtype=np.int64).reshape(-1, 2)
        with torch.no_grad():
            x = torch.tensor(features, dtype=dtype)
            e = torch.tensor(edges, dtype=torch.long)
            if model_data["pooling"] is not None:
                ref = source(x, e).numpy()
            else:
                ref = source.node_features(x, e).numpy()
        ours = file_semantics_forward(model_data, features, edges)
        worst = max(worst, float(np.max(np.abs(ours - ref))) if ref.size else 0.0)
    return worst


def export_model(job: ExportJob) -> Path:
    """Write the interchange model file, gated by forward equivalence."""
    model_data = decompose_checkpoint(job)
    gap = forward_equivalence_gap(job, model_data)
    if gap > FORWARD_TOLERANCE:
        raise ValueError(
            f"forward-equivalence check failed: deviation {gap:.2e} exceeds {FORWARD_TOLERANCE:.0e}"
        )
    out = Path(job.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(model_data))
    return out


# -- graphs --------------------------------------------------------------------


def graph_to_interchange(graph: LoadedGraph) -> dict:
    edges = {(int(u), int(v)) for u, v in graph.edges}
    if not graph.directed:
        edges = {(min(u, v), max(u, v)) for u, v in edges}
    return {
        "num_nodes": int(graph.features.shape[0]),
        "directed": graph.directed,
        "edges": [list(e) for e in sorted(edges)],
        "features": graph.features.tolist(),
    }


def export_graph(dataset: str | Path, out_dir: str | Path, index: int | None = None) -> list[Path]:
    """Write interchange graph files: one for node datasets, one per graph
    (or the chosen index) for graph datasets."""
    graphs = load_dataset(dataset)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(dataset).stem
    written = []
    if len(graphs) == 1 and index is None:
        path = out_dir / f"{stem}.json"
        path.write_text(json.dumps(graph_to_interchange(graphs[0])))
        return [path]
    selected = enumerate(graphs) if index is None else [(index, graphs[index])]
    for i, graph in selected:
        path = out_dir / f"{stem}_{i}.json"
        path.write_text(json.dumps(graph_to_interchange(graph)))
        written.append(path)
    return written
