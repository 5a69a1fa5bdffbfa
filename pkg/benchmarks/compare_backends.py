#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-Python fallback.

Runs the same workloads through both backends by re-launching itself with
``UPKEEP_NO_NUMBA=1`` and prints a side-by-side table.  The first numba run
includes JIT compilation; a warmup pass is measured separately so the steady
state is visible.

Usage:
    python benchmarks/compare_backends.py            # full comparison
    python benchmarks/compare_backends.py --backend current --json
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def workloads(scale: float):
    """Name -> (setup, run) pairs; ``run`` returns a consistency checksum."""
    from upkeep.model import ComponentModel
    from upkeep.scenario import decay_rows
    from upkeep import kernels

    comp = ComponentModel(
        name="bench",
        s_max=100,
        decay=decay_rows("mixture", 100, dict(max_drop=6, drop_prob=0.4,
                                              shock_drop=30, shock_prob=0.06)),
        cost_d=0,
        cost_q=2,
        cost_m=45,
    )
    cdf = comp.decay_cdf
    costs = comp.cost_array

    def bench_rng():
        state = np.array([123, 456], dtype=np.uint64)
        acc = 0.0
        for _ in range(int(2_000_000 * scale)):
            acc += kernels.rng_uniform(state)
        return acc

    def bench_search():
        state = np.array([7, 11], dtype=np.uint64)
        particles = np.full(200, 80, dtype=np.int64)
        acc = 0.0
        for _ in range(max(1, int(20 * scale))):
            a, q, _ = kernels.pomcp_search(cdf, costs, 500, 0, particles, 60,
                                           1000, 50, 10.0, True, state, 0)
            acc += a + q
        return acc

    def bench_episode():
        acc = 0.0
        for ep in range(max(1, int(10 * scale))):
            out = kernels.run_episode_planned(cdf, costs, 300, 100, 100, 300,
                                              50, 10.0, True, 300,
                                              np.uint64(ep + 1), np.uint64(9),
                                              np.uint64(ep + 2), np.uint64(3))
            acc += out[7] + out[8]
        return acc

    return {
        "rng_uniform (2M draws)": bench_rng,
        "pomcp_search (20 x 1000 sims)": bench_search,
        "planned episode (10 x H=100)": bench_episode,
    }


def run_current(scale: float) -> dict:
    from upkeep import kernels

    results = {"backend": kernels.BACKEND, "timings": {}, "checksums": {}}
    for name, fn in workloads(scale).items():
        t0 = time.perf_counter()
        warm = fn()
        warmup = time.perf_counter() - t0
        t0 = time.perf_counter()
        check = fn()
        elapsed = time.perf_counter() - t0
        results["timings"][name] = elapsed
        results["checksums"][name] = check
        results.setdefault("warmup", {})[name] = warmup
        del warm
    return results


def run_subprocess(no_numba: bool, scale: float) -> dict:
    env = dict(os.environ)
    env["UPKEEP_NO_NUMBA"] = "1" if no_numba else "0"
    out = subprocess.run(
        [sys.executable, __file__, "--backend", "current", "--json",
         "--scale", str(scale)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--backend", choices=("both", "current"), default="both")
    parser.add_argument("--json", action="store_true")
    parser.add_argument("--scale", type=float, default=1.0,
                        help="workload multiplier (python path uses scale/50)")
    args = parser.parse_args()

    if args.backend == "current":
        results = run_current(args.scale)
        if args.json:
            print(json.dumps(results))
        else:
            for name, t in results["timings"].items():
                print(f"{results['backend']:>7s} {name:36s} {t:8.3f}s")
        return 0

    jit = run_subprocess(no_numba=False, scale=args.scale)
    # the python path is slow; run a smaller workload and scale up linearly
    py_scale = args.scale / 50.0
    py = run_subprocess(no_numba=True, scale=py_scale)

    print(f"{'workload':38s} {'numba':>10s} {'python':>12s} {'speedup':>9s}")
    print("-" * 74)
    for name, t_jit in jit["timings"].items():
        t_py = py["timings"][name] * (args.scale / py_scale)
        print(f"{name:38s} {t_jit:9.3f}s {t_py:11.3f}s {t_py / t_jit:8.1f}x")
    print(
        f"\nnumba warmup (includes JIT compile): "
        f"{sum(jit['warmup'].values()):.1f}s total"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
