#!/usr/bin/env python3
"""Ablation experiment: exploration ratio and wall time per toggle variant.

Runs a fixed randomized instance suite under the full configuration, the
naive configuration, and each single-toggle-off variant, then prints a
per-variant summary table (mean exploration ratio, mean calls, mean time).
"""

import argparse
import random
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from conftest import InstanceSampler

from gnncert import Aggregation, SearchConfig, verify_instance

VARIANTS = [
    ("full", SearchConfig()),
    ("no-heuristics", SearchConfig(heuristics_on=False)),
    ("no-incremental", SearchConfig(incremental_on=False)),
    ("no-reorder", SearchConfig(reorder_on=False)),
    ("no-budget-tighten", SearchConfig(budget_tighten_on=False)),
    ("no-local-inference", SearchConfig(local_inference_on=False)),
    ("naive", SearchConfig.naive()),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=100)
    parser.add_argument("--seed", type=int, default=777)
    args = parser.parse_args()

    sampler = InstanceSampler(seed=args.seed)
    suite = []
    while len(suite) < args.instances:
        inst = sampler.instance(list(Aggregation)[len(suite) % 3], max_fragile=8)
        if len(inst.fragile) >= 4 and inst.global_budget >= 1:
            suite.append(inst)

    baseline = None
    print(f"{'variant':<20} {'mean alpha':>10} {'mean calls':>11} {'mean ms':>9}")
    for name, config in VARIANTS:
        ratios, calls, times = [], [], []
        verdicts = []
        for inst in suite:
            verdict = verify_instance(inst, config)
            ratios.append(verdict.stats.exploration_ratio)
            calls.append(verdict.stats.recursive_calls)
            times.append(verdict.stats.wall_time * 1000)
            verdicts.append(verdict.kind)
        if baseline is None:
            baseline = verdicts
        elif verdicts != baseline:
            print("variant changed a verdict: investigate", file=sys.stderr)
            return 1
        print(
            f"{name:<20} {statistics.mean(ratios):>10.4f} "
            f"{statistics.mean(calls):>11.1f} {statistics.mean(times):>9.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
