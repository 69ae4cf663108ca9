#!/usr/bin/env python3
"""Benchmark: compiled Crank-Nicolson kernel vs NumPy fallback.

Runs a representative batched propagation (driven-well operator, 64 modes)
with both kernel implementations and reports steps/second and the speedup.
Invoke as  python benchmarks/bench_cn.py [--steps N] [--modes M].
"""

import argparse
import time

import numpy as np

from resonlab import _kernels
from resonlab.model import ModelParams
from resonlab.propagator import assemble, make_grid


def build_problem(modes: int):
    P = ModelParams(a=0.0, b=1.0, c=0.32, V0=1.0, h=0.1, theta0=0.2j,
                    eta=0.155, d0=0.6, T=2.0)
    grid = make_grid(P, points_per_h=16, L=1.0)
    Hd = assemble(-1.3, P.theta0, grid, P)
    rng = np.random.default_rng(12345)
    n = Hd.d0.size
    U = (rng.normal(size=(n, modes)) + 1j * rng.normal(size=(n, modes)))
    return Hd, U


def run(kernel, Hd, U, steps: int, kappa: float) -> float:
    dc = np.full(steps, Hd.delta_unit * (-1.3), dtype=complex)
    t0 = time.perf_counter()
    kernel(Hd.dl, Hd.d0, Hd.du, Hd.jc, dc, kappa, U)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--modes", type=int, default=64)
    args = ap.parse_args()

    Hd, U0 = build_problem(args.modes)
    kappa = 1e-4
    print(f"nodes={Hd.d0.size} modes={args.modes} steps={args.steps} "
          f"(selected kernel: {_kernels.KERNEL_NAME})")

    U = U0.copy()
    t_py = run(_kernels.cn_run_py, Hd, U, args.steps, kappa)
    res_py = U.copy()
    print(f"numpy fallback : {t_py:8.3f} s  ({args.steps / t_py:9.1f} steps/s)")

    if _kernels.HAVE_COMPILED:
        from resonlab import _cnkernel
        U = U0.copy()
        t_c = run(_cnkernel.cn_run, Hd, U, args.steps, kappa)
        diff = float(np.max(np.abs(U - res_py)))
        print(f"compiled kernel: {t_c:8.3f} s  ({args.steps / t_c:9.1f} steps/s)")
        print(f"speedup x{t_py / t_c:.2f}, max field difference {diff:.3e}")
    else:
        print("compiled kernel not available in this build")


if __name__ == "__main__":
    main()
