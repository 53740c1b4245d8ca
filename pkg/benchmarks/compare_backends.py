#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each workload twice in separate interpreters (KEYNODE_BACKEND=numba
and =numpy), reports wall times and the speedup, and checks that the
cascade results are bitwise identical across backends.

    python3 benchmarks/compare_backends.py [--nodes 1500] [--runs 50]
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def worker(args):
    import numpy as np

    from keynode.backend import backend_name
    from keynode.centrality import CentralityId, compute_centrality
    from keynode.diffusion import ThresholdSet, records_to_csv, simulate_all
    from keynode.graph import generate_synthetic
    from keynode.models import ModelSpec, train

    g = generate_synthetic("erdos_renyi", args.nodes, 8.0 / args.nodes, seed=7)
    timings = {}

    t0 = time.perf_counter()
    records = simulate_all(g, ThresholdSet.citation(), runs=args.runs, master_seed=3)
    timings["simulate_all"] = time.perf_counter() - t0
    digest = hashlib.sha256(records_to_csv(records).encode()).hexdigest()

    t0 = time.perf_counter()
    compute_centrality(g, CentralityId.betweenness)
    timings["betweenness"] = time.perf_counter() - t0

    rng = np.random.Generator(np.random.PCG64(1))
    X = rng.normal(0, 1, (4000, 15))
    y = (X[:, 0] + 0.5 * X[:, 3] > 0).astype(int)
    t0 = time.perf_counter()
    train(ModelSpec("gbm", {"n_rounds": 30}), X, y)
    timings["gbm_train"] = time.perf_counter() - t0

    print(json.dumps({
        "backend": backend_name(),
        "timings": timings,
        "cascade_sha256": digest,
    }))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=1500)
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        worker(args)
        return

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, KEYNODE_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker",
             "--nodes", str(args.nodes), "--runs", str(args.runs)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            if backend == "numba":
                print("numba backend unavailable, skipping:", proc.stderr.strip()[-200:])
                continue
            raise SystemExit(proc.stderr)
        results[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    if not results:
        raise SystemExit("no backend produced results")

    workloads = ["simulate_all", "betweenness", "gbm_train"]
    print(f"\n{'workload':<14}" + "".join(f"{b:>12}" for b in results) +
          ("   speedup" if len(results) == 2 else ""))
    for w in workloads:
        row = f"{w:<14}"
        for b in results:
            row += f"{results[b]['timings'][w]:>11.2f}s"
        if len(results) == 2:
            numba_t = results["numba"]["timings"][w]
            numpy_t = results["numpy"]["timings"][w]
            row += f"{numpy_t / numba_t:>9.1f}x"
        print(row)

    if len(results) == 2:
        same = results["numba"]["cascade_sha256"] == results["numpy"]["cascade_sha256"]
        print(f"\ncascade outputs bitwise identical across backends: {same}")
        if not same:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
