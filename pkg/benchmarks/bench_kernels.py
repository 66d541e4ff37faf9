"""Time the compiled matrix-response kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--sizes 2 4 8] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from opcalc import _kernels_py as python_backend
from opcalc import kernels

KERNELS = ["quad_energy", "quad_grad_a", "quad_grad_r", "quad_hess_aa", "quad_hess_ar"]


def make_args(n, seed=0):
    rng = np.random.default_rng(seed)
    nn = n * n
    b = rng.normal(size=(nn + n, nn + n))
    D = b @ b.T / (nn + n)
    ninv = np.eye(n) * 2.0 + 0.3
    e = np.exp(rng.normal(size=n) * 0.3)
    return ninv, e, D[nn:, nn:].copy(), D[:nn, :nn].copy(), D[:nn, nn:].copy(), rng.normal(size=(n, n))


def best_time(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[2, 4, 8])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    compiled = kernels.compiled_backend
    if compiled is None:
        print("compiled extension not available; only the Python fallback is timed")
    print(f"{'kernel':<14s} {'n':>3s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for n in args.sizes:
        call_args = make_args(n)
        for name in KERNELS:
            t_py = best_time(getattr(python_backend, name), call_args, args.repeat)
            if compiled is None:
                print(f"{name:<14s} {n:3d} {t_py:12.3e} {'-':>12s} {'-':>9s}")
                continue
            t_cy = best_time(getattr(compiled, name), call_args, args.repeat)
            print(f"{name:<14s} {n:3d} {t_py:12.3e} {t_cy:12.3e} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
