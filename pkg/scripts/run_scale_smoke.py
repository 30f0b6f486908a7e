#!/usr/bin/env python3
"""Scale smoke run: verify many targets on a 300-vertex synthetic instance.

Builds a random average-in-degree-2 directed graph with a 4-layer
hidden-dim-32 sum-aggregation model, deletion-only fragile set and global
budget 5, then verifies a sample of target vertices single-threaded while
tracking wall time and peak memory.
"""

import argparse
import random
import sys
import time

import numpy as np
import psutil

from gnncert import (
    FeaturedGraph,
    GnnModel,
    Layer,
    Aggregation,
    RobustnessInstance,
    SearchConfig,
    TaskTarget,
    verify_instance,
)
from gnncert.instance import delete_only_fragile
from gnncert.models import predict_node


def build_instance_family(seed: int, n: int, hidden: int, layers: int):
    rng = random.Random(seed)
    nprng = np.random.default_rng(seed)
    edges = set()
    while len(edges) < 2 * n:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            edges.add((u, v))
    g = FeaturedGraph(n, True, edges, nprng.normal(0, 1, (n, 16)))
    dims = [16] + [hidden] * (layers - 1) + [4]

    def kaiming(shape):
        bound = np.sqrt(1.0 / shape[1])
        return nprng.uniform(-bound, bound, shape)

    model = GnnModel(
        dims,
        Aggregation.SUM,
        [
            Layer(
                kaiming((dims[i + 1], dims[i])),
                kaiming((dims[i + 1], dims[i])),
                nprng.uniform(-0.1, 0.1, dims[i + 1]),
            )
            for i in range(layers)
        ],
    )
    return rng, g, model, delete_only_fragile(g)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--vertices", type=int, default=300)
    parser.add_argument("--targets", type=int, default=50)
    parser.add_argument("--budget", type=int, default=5)
    parser.add_argument("--timeout", type=float, default=300.0)
    parser.add_argument("--seed", type=int, default=99)
    args = parser.parse_args()

    rng, g, model, fragile = build_instance_family(args.seed, args.vertices, 32, 4)
    proc = psutil.Process()
    kinds: dict[str, int] = {}
    peak = 0
    start = time.monotonic()
    for i, v0 in enumerate(rng.sample(range(g.num_vertices), args.targets)):
        inst = RobustnessInstance(
            model,
            g,
            TaskTarget(class_index=predict_node(model, g, v0), vertex=v0),
            set(fragile),
            args.budget,
        )
        t0 = time.monotonic()
        verdict = verify_instance(inst, SearchConfig(timeout=args.timeout))
        dt = time.monotonic() - t0
        rss = proc.memory_info().rss
        peak = max(peak, rss)
        kinds[verdict.kind] = kinds.get(verdict.kind, 0) + 1
        print(
            f"[{i + 1:3d}/{args.targets}] v={v0:<4d} {verdict.kind:<11s} "
            f"calls={verdict.stats.recursive_calls:<9d} t={dt:7.2f}s rss={rss / 1e6:7.0f}MB",
            flush=True,
        )
    print(
        f"done: {kinds} in {time.monotonic() - start:.1f}s, peak memory {peak / 1e6:.0f} MB"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
