#!/usr/bin/env python3
"""Benchmark the numba step kernels against the pure-numpy fallbacks.

Runs the explicit update for the four kernel variants on representative grid
sizes, reports per-step wall time for both backends and the speedup, and
checks that the two backends agree (bitwise for m = 2).

Usage:
    python benchmarks/bench_step_kernels.py [--steps 2000] [--m 2.0]

The same comparison can be driven through the environment switch: running
any workload with ERGODIC_HJ_DISABLE_NUMBA=1 selects the numpy path
package-wide.
"""

import argparse
import time

import numpy as np

from ergodic_hj import kernels


def bench(fn, u, f, dt, inv_h, inv_h2, m, steps):
    out = np.empty_like(u)
    fn(u, f, dt, inv_h, inv_h2, m, out)  # warm-up (jit compile)
    t0 = time.perf_counter()
    for _ in range(steps):
        fn(u, f, dt, inv_h, inv_h2, m, out)
    elapsed = time.perf_counter() - t0
    return elapsed / steps, out.copy()


CASES = [
    ("box 1D, 1281 nodes", kernels.step_box_1d_numba, kernels.step_box_1d_numpy, (1281,)),
    ("torus 1D, 1280 nodes", kernels.step_torus_1d_numba, kernels.step_torus_1d_numpy, (1280,)),
    ("box 2D, 321x321", kernels.step_box_2d_numba, kernels.step_box_2d_numpy, (321, 321)),
    ("torus 2D, 320x320", kernels.step_torus_2d_numba, kernels.step_torus_2d_numpy, (320, 320)),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--m", type=float, default=2.0)
    args = parser.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    h = 0.025
    dt = 0.9 / (4.0 / h**2 + 2.0 * 8.0 / h)  # CFL-sized step for the data below
    print(f"m = {args.m}, {args.steps} steps per case\n")
    print(f"{'case':24s} {'numba/step':>12s} {'numpy/step':>12s} {'speedup':>8s} {'max|diff|':>10s}")
    for name, fn_jit, fn_np, shape in CASES:
        g = [np.linspace(-4.0, 4.0, n) for n in shape]
        if len(shape) == 1:
            u = 0.5 * g[0] ** 2 + 0.3 * np.cos(3.0 * g[0])
            f = g[0] ** 2
        else:
            X, Y = np.meshgrid(g[0], g[1], indexing="ij")
            u = 0.5 * (X**2 + Y**2) + 0.3 * np.cos(3.0 * X) * np.cos(2.0 * Y)
            f = X**2 + Y**2
        steps = args.steps if len(shape) == 1 else max(args.steps // 10, 10)
        t_jit, out_jit = bench(fn_jit, u, f, dt, 1.0 / h, 1.0 / h**2, args.m, steps)
        t_np, out_np = bench(fn_np, u, f, dt, 1.0 / h, 1.0 / h**2, args.m, steps)
        diff = float(np.max(np.abs(out_jit - out_np)))
        print(
            f"{name:24s} {t_jit * 1e6:9.1f} us {t_np * 1e6:9.1f} us "
            f"{t_np / t_jit:7.1f}x {diff:10.2e}"
        )
        if args.m == 2.0 and diff != 0.0:
            raise SystemExit(f"backends disagree on {name}")


if __name__ == "__main__":
    main()
