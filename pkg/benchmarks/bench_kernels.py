"""Benchmark the numba kernels against the pure-numpy fallback.

The IRLS loop dominates the simulation harness (hundreds of thousands of
small-matrix fits), which is why it carries @njit. Run:

    python benchmarks/bench_kernels.py [--n 200] [--repeats 2000]

Both backends are imported directly, so the PRIOR_FORGE_NUMBA flag is not
needed here.
"""

import argparse
import time

import numpy as np

from priorforge import _kernels_nb as nb
from priorforge import _kernels_np as knp


def make_data(n, k, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, k - 1))])
    eta = X @ np.linspace(0.4, -0.4, k)
    yb = rng.binomial(1, 1 / (1 + np.exp(-eta))).astype(np.float64)
    yp = rng.poisson(np.exp(eta)).astype(np.float64)
    yg = eta + rng.standard_normal(n)
    off = np.zeros(n)
    return X, yb, yp, yg, off, eta


def timeit(fn, repeats):
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1e6  # us per call


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200, help="rows per fit")
    parser.add_argument("--k", type=int, default=4, help="design columns")
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    X, yb, yp, yg, off, eta = make_data(args.n, args.k)

    cases = [
        ("fit_irls binomial", lambda m: m.fit_irls(1, yb, X, off, 1e-10, 100)),
        ("fit_irls poisson", lambda m: m.fit_irls(2, yp, X, off, 1e-10, 100)),
        ("fit_gaussian", lambda m: m.fit_gaussian(yg, X, off)),
        ("loglik_binomial", lambda m: m.loglik_binomial(yb, eta)),
        ("loglik_poisson", lambda m: m.loglik_poisson(yp, eta)),
        ("loglik_gaussian_profiled", lambda m: m.loglik_gaussian_profiled(yg, eta)),
    ]

    # warm-up triggers jit compilation so it is not billed to the timings
    for _, fn in cases:
        fn(nb)
        fn(knp)

    print(f"n={args.n} k={args.k} repeats={args.repeats}")
    print(f"{'kernel':<26} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for name, fn in cases:
        t_np = timeit(lambda: fn(knp), args.repeats)
        t_nb = timeit(lambda: fn(nb), args.repeats)
        print(f"{name:<26} {t_np:>10.1f} {t_nb:>10.1f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
