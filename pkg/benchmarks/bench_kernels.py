"""Compiled against pure-Python event kernel.

Usage: python3 benchmarks/bench_kernels.py [--radius 200] [--horizon 50] [--repeat 3]

Both kernels are fed the same ring schedule; outputs are checked to be
identical before timings are reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from tricontact import backend
from tricontact.experiments import InitialSpec, build_initial
from tricontact.lattice import Boundary
from tricontact.schedule import ring_schedule, rng_from_seed


def run(kernel, states0, sites, draws, q):
    n = len(sites)
    states = states0.copy()
    out = (np.empty(n, np.int8), np.empty(n, np.int64), np.empty(n, np.int64),
           np.empty(n, np.int64), np.empty(n, np.int8))
    t0 = time.perf_counter()
    kernel(states, sites, draws, q, 0, 1, 1, *out)
    return time.perf_counter() - t0, states, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radius", type=int, default=200)
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--q", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cfg = build_initial(args.radius, InitialSpec("block", 20, "periodic", spacing=8), Boundary.passive())
    t0 = time.perf_counter()
    _, sites, draws = ring_schedule(len(cfg), args.horizon, rng_from_seed(1))
    t_sched = time.perf_counter() - t0
    n = len(sites)
    print(f"window {len(cfg)} sites, horizon {args.horizon:g}, {n} events; schedule {t_sched * 1e3:.1f} ms")
    if backend.compiled_run_events is None:
        print("compiled kernel not built; only the Python kernel is timed")
        kernels = {"python": backend.python_run_events}
    else:
        kernels = {"compiled": backend.compiled_run_events, "python": backend.python_run_events}
    best, results = {}, {}
    for name, k in kernels.items():
        times = []
        for _ in range(args.repeat):
            dt, st, out = run(k, cfg.states, sites, draws, args.q)
            times.append(dt)
        best[name] = min(times)
        results[name] = (st, out)
        print(f"{name:>9}: {best[name] * 1e3:9.2f} ms  ({n / best[name] / 1e6:7.2f} M events/s)")
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        same = np.array_equal(a[0], b[0]) and all(np.array_equal(x, y) for x, y in zip(a[1], b[1]))
        print(f"outputs identical: {same}")
        print(f"speedup: {best['python'] / best['compiled']:.1f}x")


if __name__ == "__main__":
    main()
