#!/usr/bin/env python3
"""Time the compiled loop kernels against the vectorized numpy kernels.

    python benchmarks/bench_kernels.py [--n 10000 100000] [--m 10 30] [--repeat 5]

Also times a full ``fit`` under each backend by running the EM loop with the
kernel table swapped in.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from heurepo import _jit, kernels
from heurepo.labelmodel import fit, planted_params, sample_synthetic


def bench_kernel(table, name, args, repeat):
    fn = table[name]
    fn(*args)  # warm-up, triggers JIT compilation
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def bench_fit(table, L, repeat):
    saved = kernels._active
    kernels._active = table
    try:
        fit(L)
        return min(timeit.repeat(lambda: fit(L), number=1, repeat=repeat))
    finally:
        kernels._active = saved


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--m", type=int, nargs="+", default=[10, 30])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tables = {"loop": kernels.LOOP_KERNELS, "numpy": kernels.NUMPY_KERNELS}
    print(f"numba available: {_jit.HAVE_NUMBA} (loop kernels are {'compiled' if _jit.HAVE_NUMBA else 'plain python'})")
    print(f"{'n':>8} {'m':>4} {'kernel':<16} {'loop ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for n in args.n:
        for m in args.m:
            rng = np.random.default_rng(args.seed)
            truth = planted_params(m, rng)
            L, _ = sample_synthetic(truth, n, rng)
            cells = L.cells
            w = truth.weights
            cases = {
                "posteriors": (cells, w, 0.0),
                "em_step": (cells, w, 0.0),
                "log_likelihood": (cells, truth.accuracies, truth.propensities, 0.5),
                "vote_stats": (cells,),
            }
            rows = {}
            for name, kargs in cases.items():
                rows[name] = [bench_kernel(tables[t], name, kargs, args.repeat) for t in ("loop", "numpy")]
            rows["fit (end to end)"] = [bench_fit(tables[t], L, args.repeat) for t in ("loop", "numpy")]
            for name, (a, b) in rows.items():
                print(f"{n:>8} {m:>4} {name:<16} {a * 1e3:>10.2f} {b * 1e3:>10.2f} {b / a:>7.1f}x")


if __name__ == "__main__":
    main()
