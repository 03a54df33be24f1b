"""Deterministic boosted-tree regressor with twin numba/numpy kernels."""

from ._kernels import backend_name
from .boosting import (
    FORMAT_TAG,
    BoostedEnsemble,
    MissingFeatureError,
    ModelFormatError,
    ModelVersionError,
    RegressorError,
    TrainOptions,
    Tree,
    deserialize,
    fit,
    predict,
    predict_matrix,
    serialize,
)

__all__ = [
    "FORMAT_TAG",
    "BoostedEnsemble",
    "MissingFeatureError",
    "ModelFormatError",
    "ModelVersionError",
    "RegressorError",
    "TrainOptions",
    "Tree",
    "backend_name",
    "deserialize",
    "fit",
    "predict",
    "predict_matrix",
    "serialize",
]
