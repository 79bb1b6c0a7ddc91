"""Compare the compiled and numpy group kernels on random batches.

Run with ``python3 benchmarks/bench_kernels.py [--rows N] [--repeat R]``.
Prints one line per kernel and dimension with the best-of-R wall time of
each backend, the speedup, and the largest disagreement between backends.
"""

import argparse
import timeit

import numpy as np

from heisrect import kernels


def cases(n, rows, rng):
    p = rng.uniform(-1.0, 1.0, (rows, 2 * n + 1))
    q = rng.uniform(-1.0, 1.0, (rows, 2 * n + 1))
    z = np.ascontiguousarray(p[0])
    return {
        "mul": lambda impl: kernels.mul(p, q, n, impl),
        "norm": lambda impl: kernels.norm(p, n, impl),
        "dist": lambda impl: kernels.dist(p, q, n, impl),
        "dist_one_many": lambda impl: kernels.dist(z, q, n, impl),
        "argmin": lambda impl: np.array(kernels.argmin_dist(z, q, n, impl), dtype=float),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    found = kernels.backends()
    if "cython" not in found:
        print("compiled backend unavailable; only the numpy fallback is installed")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14} {'n':>2} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max diff':>9}")
    for n in (1, 2, 3):
        for name, fn in cases(n, args.rows, rng).items():
            times = {}
            for backend, impl in found.items():
                fn(impl)
                times[backend] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
            diff = float(np.max(np.abs(fn(found["python"]) - fn(found["cython"]))))
            py, cy = times["python"] * 1e3, times["cython"] * 1e3
            print(f"{name:<14} {n:>2} {py:>10.2f} {cy:>10.2f} {py / cy:>8.2f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
