"""Compare the compiled and numpy backends of the hot kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Reports best-of-N wall time per kernel and the max relative difference
between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from calderon import _pykernels

try:
    from calderon import _ckernels
except ImportError:
    _ckernels = None


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(rng):
    # e^u E1(u) on a Faddeev-kernel sized argument set
    u = (rng.uniform(-30, 30, (512, 512)) + 1j * rng.uniform(-30, 30, (512, 512)))
    yield "scaled_exp1 512x512", (u,), "scaled_exp1"
    n, m = 256, 257
    lower = rng.uniform(0.5, 1, (m, n))
    upper = rng.uniform(0.5, 1, (m, n))
    diag = -4 + rng.uniform(-0.1, 0.1, (m, n))
    fact = _pykernels.tridiag_factor(lower, diag, upper)
    rhs = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    yield "tridiag_solve 257 modes x 256", (*fact, rhs), "tridiag_solve"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max rel diff':>14}")
    for name, args, attr in cases(rng):
        py = getattr(_pykernels, attr)
        tp = best_time(lambda: py(*args), a.repeat)
        if _ckernels is None:
            print(f"{name:<32}{tp:12.4f}{'n/a':>12}{'':>10}{'':>14}")
            continue
        cy = getattr(_ckernels, attr)
        tc = best_time(lambda: cy(*args), a.repeat)
        ref, got = py(*args), cy(*args)
        diff = float(np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)))
        print(f"{name:<32}{tp:12.4f}{tc:12.4f}{tp / tc:10.2f}{diff:14.2e}")


if __name__ == "__main__":
    main()
