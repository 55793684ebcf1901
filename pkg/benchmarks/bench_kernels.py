"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--sizes 100 300 500] [--repeat 3]

Each kernel is run once per backend before timing so compilation is not
counted.  Both backends must return the same result; the script checks that
too.
"""
import argparse
import time

import numpy as np

from sicomore import _accel
from sicomore.cluster import EUCLIDEAN, ONE_MINUS_R2, dissimilarity, ward_from_dissimilarity
from sicomore.lasso import DEV_MAX, lambda_grid, solve_path


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 500])
    ap.add_argument("--n-samples", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _accel.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print("kernel\tD\tnumba_s\tnumpy_s\tspeedup\tagree")
    for d in args.sizes:
        x = rng.standard_normal((args.n_samples, d))
        x = (x - x.mean(0)) / x.std(0)
        y = x[:, :5] @ rng.uniform(0.5, 1.5, 5) + rng.standard_normal(args.n_samples)
        y -= y.mean()
        pf = rng.uniform(0.5, 2.0, d)
        lam = lambda_grid(x, y, pf)
        cases = {
            "ward": lambda nb: ward_from_dissimilarity(dissimilarity(x, EUCLIDEAN), "ward", EUCLIDEAN, nb),
            "constrained": lambda nb: ward_from_dissimilarity(dissimilarity(x, ONE_MINUS_R2), "constrained",
                                                              ONE_MINUS_R2, nb),
            "cd_path": lambda nb: solve_path(x, y, lam, pf, dev_max=DEV_MAX, use_numba=nb)[0],
        }
        for name, run in cases.items():
            run(True)
            t_nb, a = best_of(lambda: run(True), args.repeat)
            t_np, b = best_of(lambda: run(False), args.repeat)
            if name == "cd_path":
                agree = np.allclose(a, b, atol=1e-6)
            else:
                agree = np.array_equal(a.left, b.left) and np.array_equal(a.right, b.right)
            print(f"{name}\t{d}\t{t_nb:.4f}\t{t_np:.4f}\t{t_np / t_nb:.1f}x\t{agree}")


if __name__ == "__main__":
    main()
