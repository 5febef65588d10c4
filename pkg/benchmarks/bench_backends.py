#!/usr/bin/env python3
"""Benchmark the JIT-compiled kernel against the pure-numpy fallback.

Both paths run the identical source (``compsum._kernels``); the numba
dispatcher exposes the uncompiled function as ``.py_func``. The workload is
the brute-force conditional-risk oracle that dominates the verification
sweeps. Values are cross-checked to 1e-9 while timing.

Usage: python benchmarks/bench_backends.py [--count 40]
"""

import argparse
import math
import time

import numpy as np

from compsum import _backend
from compsum._kernels import pgd_box_weighted_min
from compsum.risk import pgd_starts


def make_cases(count, seed=0):
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < count:
        n = int(rng.choice([2, 3, 5, 10]))
        tau = float(rng.uniform(0.0, 3.0))
        p = rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n
        if abs(2.0 - tau) > 1e-9 and \
                abs(1.0 / (2.0 - tau)) * math.log(p.max() / p.min()) > 48.0:
            continue
        starts = pgd_starts(n, 30.0, np.random.default_rng(len(cases)),
                            count=8, weights=p)
        cases.append((np.ascontiguousarray(p), tau,
                      np.ascontiguousarray(starts)))
    return cases


def run(fn, cases):
    t0 = time.perf_counter()
    vals = [fn(p, tau, 30.0, starts, 10000, 1e-10)[0]
            for p, tau, starts in cases]
    return time.perf_counter() - t0, np.array(vals)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--count", type=int, default=40)
    args = parser.parse_args()

    if not _backend.NUMBA_ENABLED:
        print("numba backend disabled (COMPSUM_NUMBA=0 or numba missing); "
              "only the numpy path is available.")
        cases = make_cases(args.count)
        t, _ = run(pgd_box_weighted_min, cases)
        print(f"numpy path: {t:.2f}s for {args.count} oracle minimizations "
              f"({1000 * t / args.count:.1f} ms each)")
        return

    cases = make_cases(args.count)
    # warm the JIT so compilation is not timed
    p, tau, starts = cases[0]
    pgd_box_weighted_min(p, tau, 30.0, starts, 100, 1e-10)

    t_jit, v_jit = run(pgd_box_weighted_min, cases)
    t_py, v_py = run(pgd_box_weighted_min.py_func, cases)
    assert np.allclose(v_jit, v_py, atol=1e-9), "backends disagree"

    print(f"{'workload':<38} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    print("-" * 70)
    label = f"box oracle x{args.count} (8 starts each)"
    print(f"{label:<38} {t_jit:>9.2f}s {t_py:>9.2f}s "
          f"{t_py / t_jit:>8.1f}x")
    print(f"per-minimization: numba {1000 * t_jit / args.count:.2f} ms, "
          f"numpy {1000 * t_py / args.count:.1f} ms; "
          f"values agree to 1e-9")


if __name__ == "__main__":
    main()
