#!/usr/bin/env python3
"""Numba vs pure-numpy kernels: timings and agreement.

Usage:
    python3 benchmarks/bench_kernels.py [--levels 1,2,3] [--repeat 3]

Both backends live in the same process (the ``backend`` argument of the
kernel wrappers picks one), so the comparison needs no environment flag.
The first numba call includes compilation and is timed separately.
"""
import argparse
import time

import numpy as np

from surfdelta import geometry, kernels


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", default="1,2,3")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--kappa", type=float, default=0.0)
    args = ap.parse_args()
    levels = [int(v) for v in args.levels.split(",")]

    warm = geometry.build_mesh(geometry.Sphere(), 0)
    t0 = time.perf_counter()
    kernels.assemble_kernel(warm, args.kappa, backend="numba")
    kernels.matfree_matvec(warm, np.ones(warm.n_panels), args.kappa, backend="numba")
    print(f"numba warm-up (compile or cache load): {time.perf_counter() - t0:.2f}s")

    print(f"{'level':>5} {'panels':>7} {'op':>10} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'max rel diff':>13}")
    for level in levels:
        mesh = geometry.build_mesh(geometry.Sphere(), level)
        n = mesh.n_panels
        t_nb, k_nb = _best(lambda: kernels.assemble_kernel(mesh, args.kappa, backend="numba"), args.repeat)
        t_np, k_np = _best(lambda: kernels.assemble_kernel(mesh, args.kappa, backend="numpy"), args.repeat)
        diff = np.abs(k_nb - k_np).max() / np.abs(k_np).max()
        print(f"{level:5d} {n:7d} {'assemble':>10} {t_nb:9.3f} {t_np:9.3f} {t_np / t_nb:8.1f} {diff:13.2e}")

        x = np.random.default_rng(level).random(n)
        t_nb, y_nb = _best(lambda: kernels.matvec(k_nb, x, backend="numba"), args.repeat)
        t_np, y_np = _best(lambda: kernels.matvec(k_nb, x, backend="numpy"), args.repeat)
        diff = np.abs(y_nb - y_np).max() / np.abs(y_np).max()
        print(f"{level:5d} {n:7d} {'matvec':>10} {t_nb:9.4f} {t_np:9.4f} {t_np / t_nb:8.1f} {diff:13.2e}")

        if n <= 1280:
            t_nb, y_nb = _best(lambda: kernels.matfree_matvec(mesh, x, args.kappa, backend="numba"), 1)
            t_np, y_np = _best(lambda: kernels.matfree_matvec(mesh, x, args.kappa, backend="numpy"), 1)
            diff = np.abs(y_nb - y_np).max() / np.abs(y_np).max()
            print(f"{level:5d} {n:7d} {'matfree':>10} {t_nb:9.3f} {t_np:9.3f} {t_np / t_nb:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
