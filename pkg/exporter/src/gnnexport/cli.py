"""Command-line conversion front end."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datasets import make_citation_dataset, make_molecule_dataset
from .export import ExportJob, export_graph, export_model


def _cmd_export_model(args) -> int:
    layer_map = None
    pooling_map = None
    if args.layer_map:
        mapping = json.loads(Path(args.layer_map).read_text())
        layer_map = mapping["layers"]
        pooling_map = mapping.get("pooling")
    job = ExportJob(
        checkpoint=args.checkpoint,
        aggregation=args.aggregation,
        output=args.out,
        task=args.task,
        layer_map=layer_map,
        pooling_map=pooling_map,
    )
    path = export_model(job)
    print(f"[gnnexport] wrote {path}", file=sys.stderr)
    return 0


def _cmd_export_graph(args) -> int:
    written = export_graph(args.dataset, args.out_dir, args.index)
    for path in written:
        print(f"[gnnexport] wrote {path}", file=sys.stderr)
    return 0


def _cmd_gen_dataset(args) -> int:
    if args.kind == "citation":
        path = make_citation_dataset(args.out, num_nodes=args.nodes, seed=args.seed)
    else:
        path = make_molecule_dataset(args.out, num_graphs=args.graphs, seed=args.seed)
    print(f"[gnnexport] wrote {path}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnexport",
        description="Convert torch GNN checkpoints and datasets to verifier interchange files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_model = sub.add_parser("export-model", help="checkpoint -> model JSON")
    p_model.add_argument("--checkpoint", required=True)
    p_model.add_argument("--aggregation", choices=("sum", "max", "mean"), required=True)
    p_model.add_argument("--task", choices=("node", "graph"), default="node")
    p_model.add_argument("--layer-map", help="JSON file naming C/A/b tensors per layer")
    p_model.add_argument("--out", required=True)
    p_model.set_defaults(func=_cmd_export_model)

    p_graph = sub.add_parser("export-graph", help="dataset archive -> graph JSON files")
    p_graph.add_argument("--dataset", required=True)
    p_graph.add_argument("--out-dir", required=True)
    p_graph.add_argument("--index", type=int, default=None, help="single graph to export")
    p_graph.set_defaults(func=_cmd_export_graph)

    p_gen = sub.add_parser("gen-dataset", help="write a synthetic dataset archive")
    p_gen.add_argument("--kind", choices=("citation", "molecule"), required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--nodes", type=int, default=60)
    p_gen.add_argument("--graphs", type=int, default=5)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen_dataset)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"[gnnexport] error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
