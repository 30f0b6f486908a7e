"""Command-line front end: verify, radius, gadget generation and batch runs.

Exit codes: 0 for completed verdicts, 2 when any instance timed out, 1 for
usage or validation errors.  Human-readable summaries go to stderr; result
records go to the ``--out`` file (JSONL or CSV).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bruteforce import GadgetSpec, brute_check, brute_radius, make_gadget
from .graphs import canonical_pair
from .instance import RobustnessInstance, all_pairs_fragile, delete_only_fragile
from .io_formats import (
    FormatError,
    load_graph,
    load_instance,
    load_model,
    result_record,
    save_instance_files,
    write_results,
)
from .models import Aggregation, TaskTarget, default_weak_target, predict_graph, predict_node
from .search import (
    SearchConfig,
    SearchStats,
    Verdict,
    VerdictKind,
    radius_instance,
    verify_instance,
)

DEFAULT_VERIFY_TIMEOUT = 300.0
DEFAULT_RADIUS_TIMEOUT = 600.0


def _add_toggle_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-incremental", action="store_true", help="disable incremental bound caching")
    parser.add_argument("--no-reorder", action="store_true", help="disable operator reordering")
    parser.add_argument("--no-budget-tighten", action="store_true", help="disable budget-aware bound tightening")
    parser.add_argument("--no-heuristics", action="store_true", help="disable edge-picking heuristics and branch ordering")
    parser.add_argument("--no-local-inference", action="store_true", help="disable local-budget edge inference")
    parser.add_argument("--brute-force", action="store_true", help="use the exhaustive reference oracle instead of the engine")


def _add_instance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--instance", help="instance JSON file (overrides the direct flags)")
    parser.add_argument("--model", help="model JSON file")
    parser.add_argument("--graph", help="graph JSON file")
    parser.add_argument("--target", type=int, help="target vertex (omit for graph classification)")
    parser.add_argument("--class", dest="class_index", type=int, help="defended class (default: the model's prediction)")
    parser.add_argument("--weak", nargs="?", const=-1, type=int, default=None,
                        help="weak robustness; optional fixed competitor class")
    parser.add_argument("--fragile", default="delete-only",
                        help="'delete-only', 'all-pairs', or a JSON file with a pair list")
    parser.add_argument("--budget", type=int, help="global perturbation budget")
    parser.add_argument("--local-budget", type=int, default=None, help="per-vertex budget")
    parser.add_argument("--out", help="results file")
    parser.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")


def _config_from_args(args, default_timeout: float) -> SearchConfig:
    timeout = args.timeout if args.timeout is not None else default_timeout
    return SearchConfig(
        heuristics_on=not args.no_heuristics,
        incremental_on=not args.no_incremental,
        reorder_on=not args.no_reorder,
        budget_tighten_on=not args.no_budget_tighten,
        local_inference_on=not args.no_local_inference,
        timeout=timeout if timeout > 0 else None,
    )


def _fragile_from_arg(spec: str, graph):
    if spec in ("delete-only", "all-pairs"):
        return spec
    pairs = json.loads(Path(spec).read_text())
    return [(int(u), int(v)) for u, v in pairs]


def _instance_from_args(args, mode: str) -> RobustnessInstance:
    if args.instance:
        instance = load_instance(args.instance)
        if args.budget is not None:
            instance.global_budget = args.budget
        if getattr(args, "max_budget", None) is not None:
            instance.max_budget = args.max_budget
        return instance
    if not args.model or not args.graph:
        raise FormatError("either --instance or both --model and --graph are required")
    if args.budget is None:
        raise FormatError("--budget is required without an instance file")
    model = load_model(args.model)
    graph = load_graph(args.graph)
    vertex = args.target
    class_index = args.class_index
    if class_index is None:
        class_index = (
            predict_node(model, graph, vertex) if vertex is not None else predict_graph(model, graph)
        )
    weak_target = None
    if args.weak is not None:
        weak_target = args.weak if args.weak != -1 else default_weak_target(class_index, model.num_classes)
    fragile_spec = _fragile_from_arg(args.fragile, graph)
    if fragile_spec == "delete-only":
        fragile = delete_only_fragile(graph)
    elif fragile_spec == "all-pairs":
        fragile = all_pairs_fragile(graph)
    else:
        fragile = {canonical_pair(p, graph.directed) for p in fragile_spec}
    return RobustnessInstance(
        model=model,
        graph=graph,
        target=TaskTarget(class_index=class_index, vertex=vertex, weak_target=weak_target),
        fragile=fragile,
        global_budget=args.budget,
        local_budget=args.local_budget,
        mode=mode,
        max_budget=getattr(args, "max_budget", None),
        instance_id=Path(args.model).stem,
    )


def _brute_verdict(instance: RobustnessInstance, mode: str, max_budget: int | None) -> Verdict:
    stats = SearchStats(fragile_count=len(instance.fragile))
    start = time.monotonic()
    if mode == "radius":
        cap = max_budget if max_budget is not None else instance.global_budget
        value = brute_radius(instance, cap)
        stats.wall_time = time.monotonic() - start
        return Verdict(VerdictKind.RADIUS, stats, radius=value)
    robust, witness = brute_check(instance)
    stats.wall_time = time.monotonic() - start
    if robust:
        return Verdict(VerdictKind.ROBUST, stats)
    return Verdict(VerdictKind.NON_ROBUST, stats, witness=witness)


def _summarize(record: dict) -> str:
    verdict = record["verdict"]
    extra = f" radius={record['radius']}" if record["radius"] is not None else ""
    return (
        f"[gnncert] instance={record['instance']} verdict={verdict}{extra} "
        f"calls={record['recursive_calls']} ratio={record['exploration_ratio']:.3f} "
        f"time={record['wall_time']:.3f}s"
    )


def _emit(records: list[dict], args) -> None:
    if args.out:
        write_results(records, args.out, args.format)
    for record in records:
        print(_summarize(record), file=sys.stderr)


def _run_single(args, mode: str) -> int:
    default_timeout = DEFAULT_RADIUS_TIMEOUT if mode == "radius" else DEFAULT_VERIFY_TIMEOUT
    config = _config_from_args(args, default_timeout)
    instance = _instance_from_args(args, mode)
    max_budget = getattr(args, "max_budget", None)
    if args.brute_force:
        verdict = _brute_verdict(instance, mode, max_budget)
    elif mode == "radius":
        verdict = radius_instance(instance, config, max_budget)
    else:
        verdict = verify_instance(instance, config)
    record = result_record(instance, verdict, config)
    _emit([record], args)
    return 2 if verdict.kind == VerdictKind.TIMEOUT else 0


def _cmd_verify(args) -> int:
    return _run_single(args, "verify")


def _cmd_radius(args) -> int:
    return _run_single(args, "radius")


def _cmd_gen_gadget(args) -> int:
    values = [int(x) for x in args.values.split(",") if x.strip()]
    spec = GadgetSpec(values=values, target=args.target_sum, aggregation=Aggregation(args.aggregation))
    instance = make_gadget(spec)
    if args.budget is not None:
        instance.global_budget = args.budget
    instance.instance_id = f"gadget_{args.aggregation}_{'_'.join(map(str, values))}_t{args.target_sum}"
    path = save_instance_files(instance, args.out_dir, stem=instance.instance_id)
    print(f"[gnncert] wrote {path}", file=sys.stderr)
    return 0


def _batch_worker(task: tuple[str, dict, bool]) -> dict:
    path, config_kwargs, use_brute = task
    config = SearchConfig(**config_kwargs)
    instance = load_instance(path)
    mode = instance.mode
    if use_brute:
        verdict = _brute_verdict(instance, mode, instance.max_budget)
    elif mode == "radius":
        verdict = radius_instance(instance, config)
    else:
        verdict = verify_instance(instance, config)
    return result_record(instance, verdict, config)


def _cmd_batch(args) -> int:
    default_timeout = DEFAULT_VERIFY_TIMEOUT
    config = _config_from_args(args, default_timeout)
    config_kwargs = dict(
        heuristics_on=config.heuristics_on,
        incremental_on=config.incremental_on,
        reorder_on=config.reorder_on,
        budget_tighten_on=config.budget_tighten_on,
        local_inference_on=config.local_inference_on,
        timeout=config.timeout,
    )
    tasks = [(p, config_kwargs, args.brute_force) for p in args.instances]
    threads = args.threads or int(os.environ.get("GNNCERT_THREADS", "1"))
    records: list[dict] = []
    if threads <= 1:
        for task in tasks:
            records.append(_batch_worker(task))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_batch_worker, tasks))
    _emit(records, args)
    return 2 if any(r["verdict"] == VerdictKind.TIMEOUT for r in records) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnncert",
        description="Exact structural-robustness verification for message-passing GNNs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="decide robustness for one instance")
    _add_instance_flags(p_verify)
    _add_toggle_flags(p_verify)
    p_verify.add_argument("--timeout", type=float, default=None, help="seconds (default 300; 0 disables)")
    p_verify.set_defaults(func=_cmd_verify)

    p_radius = sub.add_parser("radius", help="compute the exact robustness radius")
    _add_instance_flags(p_radius)
    _add_toggle_flags(p_radius)
    p_radius.add_argument("--timeout", type=float, default=None, help="seconds (default 600; 0 disables)")
    p_radius.add_argument("--max-budget", type=int, default=None, help="radius search cap d_m")
    p_radius.set_defaults(func=_cmd_radius)

    p_gadget = sub.add_parser("gen-gadget", help="emit a subset-sum hardness instance")
    p_gadget.add_argument("--aggregation", choices=("sum", "max", "mean"), required=True)
    p_gadget.add_argument("--values", required=True, help="comma-separated positive integers")
    p_gadget.add_argument("--target-sum", type=int, required=True)
    p_gadget.add_argument("--budget", type=int, default=None, help="override the default budget n")
    p_gadget.add_argument("--out-dir", required=True)
    p_gadget.set_defaults(func=_cmd_gen_gadget)

    p_batch = sub.add_parser("batch", help="run many instance files")
    p_batch.add_argument("instances", nargs="+", help="instance JSON files")
    p_batch.add_argument("--threads", type=int, default=None,
                         help="worker processes (default $GNNCERT_THREADS or 1)")
    p_batch.add_argument("--timeout", type=float, default=None, help="per-instance seconds")
    p_batch.add_argument("--out", help="results file")
    p_batch.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    _add_toggle_flags(p_batch)
    p_batch.set_defaults(func=_cmd_batch)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ValueError, OSError) as exc:
        print(f"[gnncert] error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
