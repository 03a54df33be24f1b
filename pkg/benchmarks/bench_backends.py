"""Compare the compiled and pure-numpy tree kernels.

Runs both backends in one process on identical inputs, checks that every
produced tree and prediction matches bit for bit, and reports fit times.

Usage: python benchmarks/bench_backends.py [--trials 5]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from panda.regressor import _kernels
from panda.regressor.boosting import TrainOptions, fit, predict_matrix


def _dataset(rng: np.random.Generator, n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    X = rng.uniform(0.0, 10.0, size=(n, d))
    X[:, : d // 3] = np.round(X[:, : d // 3])  # duplicate values exercise tie handling
    w = rng.normal(size=d)
    y = X @ w + rng.normal(scale=0.3, size=n)
    return np.ascontiguousarray(X), np.ascontiguousarray(y)


def _fit_time(n: int, d: int, opts: TrainOptions, trials: int, seed: int) -> tuple[float, list]:
    best = float("inf")
    models = []
    for t in range(trials):
        rng = np.random.default_rng(seed)  # same data every trial
        X, y = _dataset(rng, n, d)
        t0 = time.perf_counter()
        model = fit(X, y, opts)
        best = min(best, time.perf_counter() - t0)
        models.append((model, X))
    return best, models


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=5)
    args = parser.parse_args()

    if _kernels.backend_name() != "numba":
        print(
            "compiled backend unavailable (numba missing or PANDA_NUMBA=0); "
            "nothing to compare",
            file=sys.stderr,
        )
        return 1

    shapes = [(120, 17), (120, 87), (500, 40), (2000, 17)]
    opts = TrainOptions()

    # warm up the JIT so compile time stays out of the numbers
    Xw, yw = _dataset(np.random.default_rng(0), 50, 5)
    fit(Xw, yw, TrainOptions(n_trees=2))

    print(f"{'shape':>12}  {'numba':>9}  {'numpy':>9}  {'speedup':>7}  identical")
    mismatches = 0
    for n, d in shapes:
        t_nb, models_nb = _fit_time(n, d, opts, args.trials, seed=n + d)

        _kernels.force_backend("numpy")
        try:
            t_np, models_np = _fit_time(n, d, opts, args.trials, seed=n + d)
        finally:
            _kernels.force_backend("numba")

        same = True
        for (m1, X), (m2, _) in zip(models_nb, models_np):
            if m1 != m2:
                same = False
            elif not np.array_equal(predict_matrix(m1, X), predict_matrix(m2, X)):
                same = False
        mismatches += not same
        print(
            f"{n:>6}x{d:<5}  {t_nb * 1e3:>7.1f}ms  {t_np * 1e3:>7.1f}ms  "
            f"{t_np / t_nb:>6.1f}x  {'yes' if same else 'NO'}"
        )

    if mismatches:
        print("backends disagree", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
