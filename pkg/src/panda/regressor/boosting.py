"""Deterministic gradient-boosted regression trees.

Squared-error boosting: the ensemble starts from the training-label mean
and each tree fits the current residuals with exact greedy variance-
reduction splits. Leaf outputs are shrunk means, sum(residuals) divided by
(count + l2_leaf_reg), and the prediction is the base score plus the
learning rate times the sum of leaf outputs. There is no row or feature
subsampling and no randomness anywhere: identical inputs produce
bit-identical ensembles, and ties in the split search resolve toward the
lowest feature index and then the lowest threshold.

Serialized form is canonical JSON (fixed key order, exact float round-trip
via repr) tagged with the format id ``panda-gbt-1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels

FORMAT_TAG = "panda-gbt-1"


class RegressorError(ValueError):
    """Bad training or prediction inputs."""


class ModelFormatError(ValueError):
    """Unreadable serialized model: corrupt payload."""


class ModelVersionError(ModelFormatError):
    """Serialized model carries an unsupported format tag."""


class MissingFeatureError(RegressorError):
    """A prediction row lacks one of the model's features."""


@dataclass(frozen=True)
class TrainOptions:
    """Boosting hyperparameters. Defaults follow common gradient-boosting
    practice for small tabular problems."""

    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    l2_leaf_reg: float = 1.0
    min_samples_leaf: int = 1

    def __post_init__(self) -> None:
        if not (isinstance(self.n_trees, int) and self.n_trees >= 1):
            raise RegressorError(f"n_trees must be a positive integer, got {self.n_trees!r}")
        if not (isinstance(self.max_depth, int) and self.max_depth >= 1):
            raise RegressorError(f"max_depth must be a positive integer, got {self.max_depth!r}")
        if not (0.0 < self.learning_rate <= 1.0):
            raise RegressorError(f"learning_rate must be in (0, 1], got {self.learning_rate!r}")
        if not (self.l2_leaf_reg >= 0.0 and np.isfinite(self.l2_leaf_reg)):
            raise RegressorError(f"l2_leaf_reg must be finite and >= 0, got {self.l2_leaf_reg!r}")
        if not (isinstance(self.min_samples_leaf, int) and self.min_samples_leaf >= 1):
            raise RegressorError(
                f"min_samples_leaf must be a positive integer, got {self.min_samples_leaf!r}"
            )


@dataclass(frozen=True)
class Tree:
    """One regression tree as parallel node arrays (see _kernels)."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return (
            np.array_equal(self.feature, other.feature)
            and np.array_equal(self.threshold, other.threshold)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.value, other.value)
        )

    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=np.int64)
        out = 0
        for node in range(len(self.feature)):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
            else:
                out = max(out, int(depths[node]))
        return out


@dataclass(frozen=True)
class BoostedEnsemble:
    base_score: float
    learning_rate: float
    feature_names: tuple[str, ...]
    trees: tuple[Tree, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "trees", tuple(self.trees))
        if len(set(self.feature_names)) != len(self.feature_names):
            raise RegressorError("feature names must be distinct")


def _as_matrix(features: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise RegressorError(f"feature matrix must be 2-dimensional, got shape {X.shape}")
    return X


def fit(
    features: np.ndarray,
    labels: np.ndarray,
    opts: TrainOptions = TrainOptions(),
    *,
    feature_names: Sequence[str] | None = None,
) -> BoostedEnsemble:
    """Fit an ensemble on a feature matrix and label vector.

    ``feature_names`` names the matrix columns for dict-based prediction;
    it defaults to f0..f{k-1}. Inputs must be finite; rows and labels must
    agree in length.
    """
    X = _as_matrix(features)
    y = np.ascontiguousarray(labels, dtype=np.float64)
    n, n_features = X.shape
    if y.ndim != 1 or y.shape[0] != n:
        raise RegressorError(f"labels shape {y.shape} does not match {n} feature rows")
    if n < 1 or n_features < 1:
        raise RegressorError("need at least one row and one feature")
    if not np.isfinite(X).all():
        raise RegressorError("feature matrix contains non-finite values")
    if not np.isfinite(y).all():
        raise RegressorError("labels contain non-finite values")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(n_features))
    else:
        feature_names = tuple(feature_names)
        if len(feature_names) != n_features:
            raise RegressorError(
                f"{len(feature_names)} feature names for {n_features} matrix columns"
            )

    # Mean of value-sorted labels: permutation-invariant and shared by both
    # kernel backends.
    ysorted = np.sort(y, kind="mergesort")
    base_score = float(np.cumsum(ysorted)[-1] / n)

    residual = y - base_score
    trees = []
    for _ in range(opts.n_trees):
        arrays = _kernels.build_tree(
            X, residual, opts.max_depth, opts.min_samples_leaf, float(opts.l2_leaf_reg)
        )
        tree = Tree(*arrays)
        trees.append(tree)
        pred = _kernels.predict_tree(*arrays, X)
        residual = residual - opts.learning_rate * pred

    return BoostedEnsemble(
        base_score=base_score,
        learning_rate=float(opts.learning_rate),
        feature_names=feature_names,
        trees=tuple(trees),
    )


def predict_matrix(model: BoostedEnsemble, features: np.ndarray) -> np.ndarray:
    """Predict a column-ordered feature matrix; rows follow feature_names."""
    X = _as_matrix(features)
    if X.shape[1] != len(model.feature_names):
        raise RegressorError(
            f"feature matrix has {X.shape[1]} columns, model expects {len(model.feature_names)}"
        )
    out = np.full(X.shape[0], model.base_score, dtype=np.float64)
    for tree in model.trees:
        out = out + model.learning_rate * _kernels.predict_tree(
            tree.feature, tree.threshold, tree.left, tree.right, tree.value, X
        )
    return out


def predict(model: BoostedEnsemble, row: Mapping[str, float]) -> float:
    """Predict one named-feature row."""
    vec = np.empty((1, len(model.feature_names)), dtype=np.float64)
    for j, name in enumerate(model.feature_names):
        try:
            vec[0, j] = row[name]
        except KeyError:
            raise MissingFeatureError(f"prediction row lacks feature {name!r}") from None
    return float(predict_matrix(model, vec)[0])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def serialize(model: BoostedEnsemble) -> bytes:
    obj = {
        "format": FORMAT_TAG,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_names": list(model.feature_names),
        "trees": [
            {
                "feature": [int(v) for v in tree.feature],
                "threshold": [float(v) for v in tree.threshold],
                "left": [int(v) for v in tree.left],
                "right": [int(v) for v in tree.right],
                "value": [float(v) for v in tree.value],
            }
            for tree in model.trees
        ],
    }
    return json.dumps(obj, separators=(",", ":")).encode("utf-8")


def _tree_from_obj(obj: Mapping, index: int) -> Tree:
    expected = ("feature", "threshold", "left", "right", "value")
    if not isinstance(obj, Mapping) or set(obj) != set(expected):
        raise ModelFormatError(f"tree {index}: malformed node arrays")
    try:
        feature = np.asarray(obj["feature"], dtype=np.int32)
        threshold = np.asarray(obj["threshold"], dtype=np.float64)
        left = np.asarray(obj["left"], dtype=np.int32)
        right = np.asarray(obj["right"], dtype=np.int32)
        value = np.asarray(obj["value"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"tree {index}: {exc}") from None
    n = len(feature)
    if not all(len(a) == n for a in (threshold, left, right, value)) or n < 1:
        raise ModelFormatError(f"tree {index}: node arrays disagree in length")
    internal = feature >= 0
    kids = np.concatenate([left[internal], right[internal]])
    if internal.any() and (kids.min() < 1 or kids.max() >= n):
        raise ModelFormatError(f"tree {index}: child index out of range")
    leaf = ~internal
    if (left[leaf] != -1).any() or (right[leaf] != -1).any():
        raise ModelFormatError(f"tree {index}: leaf node carries a child index")
    return Tree(feature=feature, threshold=threshold, left=left, right=right, value=value)


def deserialize(payload: bytes | str) -> BoostedEnsemble:
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8", errors="strict")
    try:
        obj = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model payload: {exc}") from None
    if not isinstance(obj, dict):
        raise ModelFormatError("corrupt model payload: expected a JSON object")
    tag = obj.get("format")
    if tag != FORMAT_TAG:
        raise ModelVersionError(f"unsupported model format {tag!r}, expected {FORMAT_TAG!r}")
    missing = [k for k in ("base_score", "learning_rate", "feature_names", "trees") if k not in obj]
    if missing:
        raise ModelFormatError(f"corrupt model payload: missing {missing[0]!r}")
    trees = tuple(_tree_from_obj(t, i) for i, t in enumerate(obj["trees"]))
    return BoostedEnsemble(
        base_score=float(obj["base_score"]),
        learning_rate=float(obj["learning_rate"]),
        feature_names=tuple(str(s) for s in obj["feature_names"]),
        trees=trees,
    )
