"""Tree construction and traversal kernels, in two interchangeable backends.

The compiled backend JITs the scalar loops with numba; the fallback backend
is pure numpy. Both run the same exact greedy algorithm with the same
floating-point evaluation order, so they build bit-identical trees:

* rows are ordered per feature with a stable mergesort, giving one
  canonical permutation regardless of sorting implementation;
* prefix sums are accumulated left to right (numpy's cumsum is sequential,
  matching the scalar loop);
* the split score for a candidate is always evaluated as
  ``(s2l - sl*sl/nl) + (s2r - sr*sr/nr)``;
* node label sums are taken over value-sorted labels, which also makes the
  fitted tree independent of training row order when feature columns are
  duplicate-free;
* ties are broken toward the lowest feature index, then the lowest
  threshold, by accepting only strict score improvements while scanning in
  ascending order.

Backend selection happens once at import: setting the PANDA_NUMBA
environment variable to 0/false/off forces the numpy path (numba is then
never imported); otherwise numba is used when importable.

A tree is five parallel arrays indexed by node id. ``feature[i] >= 0``
marks an internal node with its split feature, threshold, and child ids;
``feature[i] == -1`` marks a leaf whose output is ``value[i]``. Node 0 is
the root and children are numbered in allocation order, so the layout is
deterministic as well.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

LEAF = -1

_FLAG = os.environ.get("PANDA_NUMBA", "").strip().lower()
_FORCED_OFF = _FLAG in ("0", "false", "no", "off")

if _FORCED_OFF:
    numba = None
else:
    try:
        import numba
    except ImportError:
        numba = None
        if _FLAG in ("1", "true", "yes", "on"):
            warnings.warn(
                "PANDA_NUMBA requested the compiled backend but numba is not "
                "importable; falling back to the numpy backend",
                RuntimeWarning,
            )

HAS_NUMBA = numba is not None


def build_tree_numpy(X, y, max_depth, min_samples_leaf, l2):
    """Pure numpy twin of the compiled tree builder."""
    n, n_features = X.shape
    cap = 2 * n - 1 if n > 1 else 1
    feature = np.full(cap, LEAF, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap, dtype=np.float64)

    idx = np.arange(n, dtype=np.int64)
    # Each stack entry is (node, start, end, depth) over a slice of idx.
    stack = [(0, 0, n, 0)]
    n_nodes = 1
    while stack:
        node, start, end, depth = stack.pop()
        rows = idx[start:end]
        cnt = end - start
        ysub = y[rows]
        ysorted = np.sort(ysub, kind="mergesort")
        cs = np.cumsum(ysorted)
        cs2 = np.cumsum(ysorted * ysorted)
        s = cs[cnt - 1]
        s2 = cs2[cnt - 1]

        best_feature = -1
        best_threshold = 0.0
        if depth < max_depth and cnt >= 2 * min_samples_leaf:
            best_score = s2 - s * s / cnt
            for f in range(n_features):
                xv = X[rows, f]
                if np.all(xv == xv[0]):
                    continue
                order = np.argsort(xv, kind="mergesort")
                xs = xv[order]
                yo = ysub[order]
                csl = np.cumsum(yo)
                cs2l = np.cumsum(yo * yo)
                nl = np.arange(1, cnt, dtype=np.float64)
                nr = cnt - nl
                sl = csl[: cnt - 1]
                s2l = cs2l[: cnt - 1]
                sr = s - sl
                s2r = s2 - s2l
                score = (s2l - sl * sl / nl) + (s2r - sr * sr / nr)
                valid = (xs[: cnt - 1] != xs[1:]) & (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
                if not valid.any():
                    continue
                score = np.where(valid, score, np.inf)
                i = int(np.argmin(score))
                if score[i] < best_score:
                    best_score = score[i]
                    best_feature = f
                    best_threshold = (xs[i] + xs[i + 1]) * 0.5

        if best_feature < 0:
            feature[node] = LEAF
            value[node] = s / (cnt + l2)
            continue

        mask = X[rows, best_feature] <= best_threshold
        left_rows = rows[mask]
        right_rows = rows[~mask]
        n_left = left_rows.shape[0]
        idx[start : start + n_left] = left_rows
        idx[start + n_left : end] = right_rows
        mid = start + n_left

        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        stack.append((right[node], mid, end, depth + 1))
        stack.append((left[node], start, mid, depth + 1))

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


def predict_tree_numpy(feature, threshold, left, right, value, X):
    """Vectorized traversal: all rows descend one level per iteration."""
    n = X.shape[0]
    nodes = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        f = feature[nodes]
        active = f >= 0
        if not active.any():
            break
        an = nodes[active]
        go_left = X[rows[active], f[active]] <= threshold[an]
        nodes[active] = np.where(go_left, left[an], right[an])
    return value[nodes]


if HAS_NUMBA:

    @numba.njit(cache=True)
    def build_tree_numba(X, y, max_depth, min_samples_leaf, l2):
        n, n_features = X.shape
        cap = 2 * n - 1 if n > 1 else 1
        feature = np.full(cap, -1, dtype=np.int32)
        threshold = np.zeros(cap, dtype=np.float64)
        left = np.full(cap, -1, dtype=np.int32)
        right = np.full(cap, -1, dtype=np.int32)
        value = np.zeros(cap, dtype=np.float64)

        idx = np.arange(n)
        stack = np.empty((n + 2, 4), dtype=np.int64)
        stack[0, 0] = 0
        stack[0, 1] = 0
        stack[0, 2] = n
        stack[0, 3] = 0
        top = 1
        n_nodes = 1
        scratch = np.empty(n, dtype=np.int64)

        while top > 0:
            top -= 1
            node = stack[top, 0]
            start = stack[top, 1]
            end = stack[top, 2]
            depth = stack[top, 3]
            cnt = end - start

            ysub = np.empty(cnt, dtype=np.float64)
            for j in range(cnt):
                ysub[j] = y[idx[start + j]]
            ysorted = np.sort(ysub.copy())
            s = 0.0
            s2 = 0.0
            for j in range(cnt):
                v = ysorted[j]
                s = s + v
                s2 = s2 + v * v

            best_feature = -1
            best_threshold = 0.0
            if depth < max_depth and cnt >= 2 * min_samples_leaf:
                best_score = s2 - s * s / cnt
                xv = np.empty(cnt, dtype=np.float64)
                for f in range(n_features):
                    for j in range(cnt):
                        xv[j] = X[idx[start + j], f]
                    same = True
                    for j in range(1, cnt):
                        if xv[j] != xv[0]:
                            same = False
                            break
                    if same:
                        continue
                    order = np.argsort(xv, kind="mergesort")
                    sl = 0.0
                    s2l = 0.0
                    for i in range(cnt - 1):
                        yv = ysub[order[i]]
                        sl = sl + yv
                        s2l = s2l + yv * yv
                        xi = xv[order[i]]
                        xj = xv[order[i + 1]]
                        if xi == xj:
                            continue
                        nl = float(i + 1)
                        nr = float(cnt - i - 1)
                        if nl < min_samples_leaf or nr < min_samples_leaf:
                            continue
                        sr = s - sl
                        s2r = s2 - s2l
                        score = (s2l - sl * sl / nl) + (s2r - sr * sr / nr)
                        if score < best_score:
                            best_score = score
                            best_feature = f
                            best_threshold = (xi + xj) * 0.5

            if best_feature < 0:
                feature[node] = -1
                value[node] = s / (cnt + l2)
                continue

            n_left = 0
            for j in range(cnt):
                row = idx[start + j]
                if X[row, best_feature] <= best_threshold:
                    scratch[n_left] = row
                    n_left += 1
            pos = n_left
            for j in range(cnt):
                row = idx[start + j]
                if not (X[row, best_feature] <= best_threshold):
                    scratch[pos] = row
                    pos += 1
            for j in range(cnt):
                idx[start + j] = scratch[j]
            mid = start + n_left

            feature[node] = best_feature
            threshold[node] = best_threshold
            left[node] = n_nodes
            right[node] = n_nodes + 1
            n_nodes += 2
            stack[top, 0] = right[node]
            stack[top, 1] = mid
            stack[top, 2] = end
            stack[top, 3] = depth + 1
            top += 1
            stack[top, 0] = left[node]
            stack[top, 1] = start
            stack[top, 2] = mid
            stack[top, 3] = depth + 1
            top += 1

        return (
            feature[:n_nodes].copy(),
            threshold[:n_nodes].copy(),
            left[:n_nodes].copy(),
            right[:n_nodes].copy(),
            value[:n_nodes].copy(),
        )

    @numba.njit(cache=True)
    def predict_tree_numba(feature, threshold, left, right, value, X):
        n = X.shape[0]
        out = np.empty(n, dtype=np.float64)
        for r in range(n):
            node = 0
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r] = value[node]
        return out

else:
    build_tree_numba = None
    predict_tree_numba = None


if HAS_NUMBA:
    BACKEND = "numba"
    build_tree = build_tree_numba
    predict_tree = predict_tree_numba
else:
    BACKEND = "numpy"
    build_tree = build_tree_numpy
    predict_tree = predict_tree_numpy


def backend_name() -> str:
    return BACKEND


def force_backend(name: str) -> None:
    """Switch kernels at runtime; mainly for benchmarks and tests.

    "numba" requires numba to be importable and not disabled by the
    PANDA_NUMBA environment flag.
    """
    global BACKEND, build_tree, predict_tree
    if name == "numpy":
        BACKEND = "numpy"
        build_tree = build_tree_numpy
        predict_tree = predict_tree_numpy
    elif name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend unavailable")
        BACKEND = "numba"
        build_tree = build_tree_numba
        predict_tree = predict_tree_numba
    else:
        raise ValueError(f"unknown backend {name!r}")
