"""Time the compiled and numpy RK4 kernels on the model lattice.

Usage::

    python3 benchmarks/bench_kernels.py [--n-cells 400] [--steps 2000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from ptssh import kernels
from ptssh.model import ModelParams, tridiagonal_bands


def bench(fn, diag, off, psi0, h, steps, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        psi = psi0.copy()
        t0 = time.perf_counter()
        fn(diag, off, psi, h, steps)
        best = min(best, time.perf_counter() - t0)
        out = psi
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-cells", type=int, default=400)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    p = ModelParams(3.0, 1.0, 3.0, 4.5)
    diag, off = tridiagonal_bands(p, args.n_cells)
    psi0 = np.zeros(diag.shape[0], dtype=np.complex128)
    psi0[2 * args.n_cells] = 1.0
    h = 0.02 / (p.t1 + p.t2 + p.g + p.gamma)

    print(f"dim = {diag.shape[0]}, steps = {args.steps}, best of {args.repeat}")
    results = {}
    for name in sorted(kernels.BACKENDS):
        dt, psi = bench(kernels.BACKENDS[name], diag, off, psi0, h, args.steps, args.repeat)
        results[name] = psi
        print(f"{name:>9}: {dt:8.4f} s  ({1e6 * dt / args.steps:7.1f} us/step)")
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        print(f"max |compiled - python| / max |psi| = {np.max(np.abs(a - b)) / np.max(np.abs(b)):.2e}")
    else:
        print("compiled extension not built; only the numpy kernel was timed")


if __name__ == "__main__":
    main()
