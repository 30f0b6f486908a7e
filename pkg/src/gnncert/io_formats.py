"""Interchange files (graph / model / instance) and result records.

All numbers are written as JSON doubles, which round-trip bit-exactly; class
indices are 1-based in files, vertices 0-based.  Validation happens at load
time and reports the failing constraint.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .graphs import FeaturedGraph, Pair, canonical_pair
from .instance import RobustnessInstance, all_pairs_fragile, delete_only_fragile
from .models import (
    Aggregation,
    GnnModel,
    Layer,
    Pooling,
    TaskTarget,
    default_weak_target,
    predict_graph,
    predict_node,
)
from .search import SearchConfig, Verdict, VerdictKind


class FormatError(ValueError):
    pass


def _load_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _require(data: dict, key: str, path) -> object:
    if key not in data:
        raise FormatError(f"{path}: missing field {key!r}")
    return data[key]


# -- graphs -----------------------------------------------------------------


def load_graph(path: str | Path) -> FeaturedGraph:
    data = _load_json(path)
    n = _require(data, "num_nodes", path)
    directed = _require(data, "directed", path)
    edges = _require(data, "edges", path)
    features = _require(data, "features", path)
    try:
        feature_arr = np.array(features, dtype=np.float64)
        edge_set = {(int(u), int(v)) for u, v in edges}
        return FeaturedGraph(int(n), bool(directed), edge_set, feature_arr)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_graph(g: FeaturedGraph, path: str | Path) -> None:
    edges = sorted(g.canonical_edges())
    data = {
        "num_nodes": g.num_vertices,
        "directed": g.directed,
        "edges": [list(e) for e in edges],
        "features": g.features.tolist(),
    }
    Path(path).write_text(json.dumps(data))


# -- models -------------------------------------------------------------------


def load_model(path: str | Path) -> GnnModel:
    data = _load_json(path)
    dims = _require(data, "dims", path)
    aggregation = _require(data, "aggregation", path)
    layer_specs = _require(data, "layers", path)
    try:
        aggr = Aggregation(aggregation)
    except ValueError as exc:
        raise FormatError(f"{path}: unknown aggregation {aggregation!r}") from exc
    layers = []
    for i, spec in enumerate(layer_specs):
        try:
            layers.append(Layer(np.array(spec["C"]), np.array(spec["A"]), np.array(spec["b"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: layer {i}: {exc}") from exc
    pooling = None
    if data.get("pooling") is not None:
        p = data["pooling"]
        try:
            pooling = Pooling(np.array(p["C"]), np.array(p["b"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: pooling: {exc}") from exc
    try:
        return GnnModel([int(d) for d in dims], aggr, layers, pooling)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_model(model: GnnModel, path: str | Path) -> None:
    data = {
        "dims": model.dims,
        "aggregation": model.aggregation.value,
        "layers": [
            {"C": l.C.tolist(), "A": l.A.tolist(), "b": l.b.tolist()} for l in model.layers
        ],
        "pooling": None
        if model.pooling is None
        else {"C": model.pooling.C.tolist(), "b": model.pooling.b.tolist()},
    }
    Path(path).write_text(json.dumps(data))


# -- instances ----------------------------------------------------------------


def _resolve_fragile(spec, graph: FeaturedGraph, allow_self_loops: bool, path) -> set[Pair]:
    if spec == "delete-only":
        return delete_only_fragile(graph)
    if spec == "all-pairs":
        return all_pairs_fragile(graph)
    if isinstance(spec, list):
        pairs = set()
        for entry in spec:
            u, v = (int(entry[0]), int(entry[1]))
            if not (0 <= u < graph.num_vertices and 0 <= v < graph.num_vertices):
                raise FormatError(f"{path}: fragile pair ({u}, {v}) out of range")
            if u == v and not allow_self_loops:
                raise FormatError(
                    f"{path}: fragile self-loop ({u}, {v}) requires allow_self_loop_fragile"
                )
            pairs.add(canonical_pair((u, v), graph.directed))
        return pairs
    raise FormatError(f"{path}: fragile must be 'delete-only', 'all-pairs' or a pair list")


def load_instance(path: str | Path) -> RobustnessInstance:
    path = Path(path)
    data = _load_json(path)
    base = path.parent
    model = load_model(base / _require(data, "model", path))
    graph = load_graph(base / _require(data, "graph", path))
    if graph.feature_dim != model.dims[0]:
        raise FormatError(
            f"{path}: graph feature dim {graph.feature_dim} != model input dim {model.dims[0]}"
        )
    task = _require(data, "task", path)
    kind = _require(task, "kind", path)
    if kind == "node":
        vertex = int(_require(task, "target", path))
    elif kind == "graph":
        vertex = None
    else:
        raise FormatError(f"{path}: task kind must be 'node' or 'graph'")
    class_index = data.get("class")
    if class_index is None:
        if vertex is not None:
            class_index = predict_node(model, graph, vertex)
        else:
            class_index = predict_graph(model, graph)
    robustness = data.get("robustness", "general")
    weak_target = None
    if robustness == "weak":
        weak_target = default_weak_target(int(class_index), model.num_classes)
    elif isinstance(robustness, dict) and "weak" in robustness:
        weak_target = int(robustness["weak"])
    elif robustness != "general":
        raise FormatError(f"{path}: robustness must be 'general', 'weak' or {{'weak': c}}")
    fragile = _resolve_fragile(
        data.get("fragile", "delete-only"),
        graph,
        bool(data.get("allow_self_loop_fragile", False)),
        path,
    )
    mode = data.get("mode", "verify")
    try:
        target = TaskTarget(class_index=int(class_index), vertex=vertex, weak_target=weak_target)
        return RobustnessInstance(
            model=model,
            graph=graph,
            target=target,
            fragile=fragile,
            global_budget=int(_require(data, "global_budget", path)),
            local_budget=None if data.get("local_budget") is None else int(data["local_budget"]),
            mode=mode,
            max_budget=None if data.get("max_budget") is None else int(data["max_budget"]),
            instance_id=str(data.get("id", path.stem)),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_instance_files(
    instance: RobustnessInstance,
    out_dir: str | Path,
    *,
    stem: str = "instance",
) -> Path:
    """Write model/graph/instance JSON files into ``out_dir``; returns the
    instance file path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(instance.model, out / f"{stem}_model.json")
    save_graph(instance.graph, out / f"{stem}_graph.json")
    data = {
        "id": instance.instance_id or stem,
        "model": f"{stem}_model.json",
        "graph": f"{stem}_graph.json",
        "task": (
            {"kind": "node", "target": instance.target.vertex}
            if instance.target.is_node
            else {"kind": "graph"}
        ),
        "class": instance.target.class_index,
        "mode": instance.mode,
        "robustness": (
            "general"
            if instance.target.weak_target is None
            else {"weak": instance.target.weak_target}
        ),
        "fragile": [list(p) for p in sorted(instance.fragile)],
        "global_budget": instance.global_budget,
        "local_budget": instance.local_budget,
        "max_budget": instance.max_budget,
        "allow_self_loop_fragile": any(u == v for u, v in instance.fragile),
    }
    target_path = out / f"{stem}.json"
    target_path.write_text(json.dumps(data))
    return target_path


# -- results --------------------------------------------------------------------


def witness_diff(reference: FeaturedGraph, witness: FeaturedGraph) -> list[dict]:
    """Edge changes from ``reference`` to ``witness`` as add/del records."""
    ref = reference.canonical_edges()
    wit = witness.canonical_edges()
    diff = []
    for pair in sorted(ref ^ wit):
        diff.append({"edge": list(pair), "change": "add" if pair in wit else "del"})
    return diff


def apply_witness_diff(reference: FeaturedGraph, diff: Iterable[dict]) -> FeaturedGraph:
    edges = set(reference.edges)
    for entry in diff:
        pair = (int(entry["edge"][0]), int(entry["edge"][1]))
        oriented = [pair] if reference.directed else [pair, (pair[1], pair[0])]
        for e in oriented:
            if entry["change"] == "add":
                edges.add(e)
            else:
                edges.discard(e)
    return FeaturedGraph(
        reference.num_vertices, reference.directed, edges, reference.features
    )


_CSV_FIELDS = [
    "instance",
    "verdict",
    "radius",
    "witness",
    "recursive_calls",
    "sat_answers",
    "unsat_answers",
    "unknown_answers",
    "exploration_ratio",
    "wall_time",
    "timed_out",
    "config",
]


def result_record(
    instance: RobustnessInstance, verdict: Verdict, config: SearchConfig
) -> dict:
    record = {
        "instance": instance.instance_id,
        "verdict": verdict.kind,
        "radius": verdict.radius,
        "witness": witness_diff(instance.graph, verdict.witness)
        if verdict.witness is not None
        else None,
        "recursive_calls": verdict.stats.recursive_calls,
        "sat_answers": verdict.stats.sat_answers,
        "unsat_answers": verdict.stats.unsat_answers,
        "unknown_answers": verdict.stats.unknown_answers,
        "exploration_ratio": verdict.stats.exploration_ratio,
        "wall_time": verdict.stats.wall_time,
        "timed_out": verdict.stats.timed_out,
        "config": {
            "heuristics": config.heuristics_on,
            "incremental": config.incremental_on,
            "reorder": config.reorder_on,
            "budget_tighten": config.budget_tighten_on,
            "local_inference": config.local_inference_on,
        },
    }
    if verdict.kind == VerdictKind.NON_ROBUST and record["witness"] is not None:
        if len(record["witness"]) > instance.global_budget:
            raise ValueError("witness diff exceeds the global budget")
    return record


def write_results(records: list[dict], path: str | Path, fmt: str = "jsonl") -> None:
    path = Path(path)
    if fmt == "jsonl":
        with open(path, "w") as fh:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True))
                fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
            writer.writeheader()
            for record in records:
                row = dict(record)
                row["witness"] = json.dumps(row["witness"]) if row.get("witness") else ""
                row["config"] = json.dumps(row["config"], sort_keys=True)
                writer.writerow(row)
    else:
        raise ValueError(f"unknown results format {fmt!r}")


def read_results_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
