"""Brute-force reference implementations for the tree tests.

Deliberately naive: every candidate split is scored with explicit Python
arithmetic. With integer-valued labels all sums are exact, so scores and
leaf values here must match the fast kernels bit for bit, tie-breaking
included (first feature in index order, then lowest threshold, and only
strict improvements over the unsplit node are accepted).
"""

from __future__ import annotations

from dataclasses import dataclass


def _sse(ys: list[float]) -> float:
    s = 0.0
    s2 = 0.0
    for v in ys:
        s += v
        s2 += v * v
    return s2 - s * s / len(ys)


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    left_value: float
    right_value: float


def leaf_value(ys: list[float], l2: float) -> float:
    s = 0.0
    for v in ys:
        s += v
    return s / (len(ys) + l2)


def best_stump(X, y, min_samples_leaf: int, l2: float) -> Stump | None:
    """Exhaustive best single split, or None when nothing beats no split."""
    n, d = len(X), len(X[0])
    best_score = _sse([float(v) for v in y])
    best = None
    for j in range(d):
        values = sorted({float(X[i][j]) for i in range(n)})
        for lo, hi in zip(values, values[1:]):
            threshold = (lo + hi) / 2.0
            left = [float(y[i]) for i in range(n) if X[i][j] <= threshold]
            right = [float(y[i]) for i in range(n) if X[i][j] > threshold]
            if len(left) < min_samples_leaf or len(right) < min_samples_leaf:
                continue
            score = _sse(left) + _sse(right)
            if score < best_score:
                best_score = score
                best = Stump(
                    feature=j,
                    threshold=threshold,
                    left_value=leaf_value(left, l2),
                    right_value=leaf_value(right, l2),
                )
    return best
