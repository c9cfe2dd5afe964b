"""Compare the compiled and NumPy Foldy kernels.

Usage: python3 benchmarks/bench_kernels.py [--sizes 125 512 1000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dimerwave.foldy._backend import get_kernels


def _problem(N, rng):
    z = rng.random((N, 3))
    g0 = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) * 1e-3
    a = rng.standard_normal((N, 3, 3)) * 1e-4
    g1 = (a + a.transpose(0, 2, 1)).astype(complex)
    return z, g0, g1


def _best(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def run(sizes, repeat=3, k=2.0, n_points=2000, seed=0):
    rng = np.random.default_rng(seed)
    try:
        compiled = get_kernels("compiled")
    except ImportError:
        compiled = None
        print("compiled extension not available; timing the NumPy kernels only")
    python = get_kernels("python")
    rows = []
    pts = rng.random((n_points, 3)) * 1.2 - 0.1
    for N in sizes:
        z, g0, g1 = _problem(N, rng)
        x = rng.standard_normal(4 * N) + 1j * rng.standard_normal(4 * N)
        q = g0 * x[0::4]
        w = np.einsum("iab,ia->ib", g1, x.reshape(-1, 4)[:, 1:])
        tp, Tp = _best(lambda: python.assemble_foldy(z, g0, g1, k), repeat)
        fp, Fp = _best(lambda: python.field_sum(pts, z, q, w, k), repeat)
        if compiled is not None:
            tc, Tc = _best(lambda: compiled.assemble_foldy(z, g0, g1, k), repeat)
            fc, Fc = _best(lambda: compiled.field_sum(pts, z, q, w, k), repeat)
            dev = max(np.abs(Tc - Tp).max() / np.abs(Tp).max(), np.abs(Fc - Fp).max() / np.abs(Fp).max())
        else:
            tc = fc = dev = float("nan")
        rows.append((N, tp, tc, fp, fc, dev))
    print(f"{'N':>6} {'assemble py':>12} {'assemble c':>12} {'x':>6} {'field py':>10} {'field c':>10} {'x':>6} {'max rel dev':>12}")
    for N, tp, tc, fp, fc, dev in rows:
        print(f"{N:6d} {tp:12.4f} {tc:12.4f} {tp / tc:6.1f} {fp:10.4f} {fc:10.4f} {fp / fc:6.1f} {dev:12.2e}")
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[125, 512, 1000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    run(args.sizes, args.repeat)
