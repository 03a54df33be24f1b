"""Cross-technology power transfer.

Physics-guided scaling carries a power number from one technology node to
another: linear in feature size, quadratic in supply voltage. A single
ensemble then learns the target/source power ratio on top of that, taking
the source power, both node ratios, and the scaled power as features, so
one model covers every ordered node pair. Training data only needs small
designs; the learned ratio generalizes to larger ones because the features
are ratios and the label is a ratio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import DatasetParseError, InvariantViolationError, TechnologyNode
from .power_model import train_options_from_obj, train_options_to_obj
from .regressor import (
    BoostedEnsemble,
    ModelFormatError,
    ModelVersionError,
    TrainOptions,
    deserialize,
    fit,
    predict_matrix,
    serialize,
)
import warnings

XFER_FORMAT_TAG = "panda-xfer-1"

TRANSFER_FEATURE_NAMES = (
    "source_power",
    "feature_size_ratio",
    "voltage_ratio",
    "cv2_scaled_power",
)


class TransferError(ValueError):
    pass


class TransferFitWarning(UserWarning):
    pass


def cv2_scale(power_w: float, source: TechnologyNode, target: TechnologyNode) -> float:
    """First-order node scaling: power * (size ratio) * (voltage ratio)^2."""
    if not power_w >= 0.0:
        raise TransferError(f"power must be >= 0, got {power_w!r}")
    return (
        power_w
        * (target.feature_size_nm / source.feature_size_nm)
        * (target.voltage_v / source.voltage_v) ** 2
    )


@dataclass(frozen=True)
class TransferSample:
    """Measured power of one design at two nodes."""

    design_id: str
    source: TechnologyNode
    target: TechnologyNode
    source_power_w: float
    target_power_w: float

    def __post_init__(self) -> None:
        if not self.design_id:
            raise InvariantViolationError("design_id must be non-empty")
        if not (self.source_power_w > 0.0 and self.target_power_w > 0.0):
            raise InvariantViolationError(
                f"transfer sample {self.design_id}: powers must be positive"
            )


def build_transfer_features(
    power_w: float, source: TechnologyNode, target: TechnologyNode
) -> dict[str, float]:
    return {
        "source_power": power_w,
        "feature_size_ratio": target.feature_size_nm / source.feature_size_nm,
        "voltage_ratio": target.voltage_v / source.voltage_v,
        "cv2_scaled_power": cv2_scale(power_w, source, target),
    }


@dataclass(frozen=True)
class TransferModel:
    ensemble: BoostedEnsemble
    train_options: TrainOptions = field(default_factory=TrainOptions)


def train_transfer(
    samples: Sequence[TransferSample],
    opts: TrainOptions = TrainOptions(),
) -> TransferModel:
    """Fit the ratio regressor over all ordered node pairs at once."""
    samples = tuple(samples)
    if len(samples) < 2:
        raise TransferError("need at least two transfer samples")
    pairs = {
        (s.source.feature_size_nm, s.source.voltage_v, s.target.feature_size_nm, s.target.voltage_v)
        for s in samples
    }
    if len(pairs) < 2:
        warnings.warn(
            "training data covers a single node pair; the model will not "
            "generalize to other pairs",
            TransferFitWarning,
            stacklevel=2,
        )
    X = np.empty((len(samples), len(TRANSFER_FEATURE_NAMES)), dtype=np.float64)
    y = np.empty(len(samples), dtype=np.float64)
    for i, s in enumerate(samples):
        row = build_transfer_features(s.source_power_w, s.source, s.target)
        for j, name in enumerate(TRANSFER_FEATURE_NAMES):
            X[i, j] = row[name]
        y[i] = s.target_power_w / s.source_power_w
    return TransferModel(
        ensemble=fit(X, y, opts, feature_names=TRANSFER_FEATURE_NAMES), train_options=opts
    )


def predict_transferred_power(
    model: TransferModel,
    predicted_power_w: float,
    source: TechnologyNode,
    target: TechnologyNode,
) -> float:
    """Scale a source-node power prediction to the target node."""
    row = build_transfer_features(predicted_power_w, source, target)
    vec = np.array([[row[n] for n in model.ensemble.feature_names]], dtype=np.float64)
    ratio = float(predict_matrix(model.ensemble, vec)[0])
    return max(0.0, predicted_power_w * ratio)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _node_obj(node: TechnologyNode) -> dict:
    return {
        "name": node.name,
        "feature_size_nm": node.feature_size_nm,
        "voltage_v": node.voltage_v,
    }


def _node_from(obj: Mapping, where: str) -> TechnologyNode:
    allowed = {"name", "feature_size_nm", "voltage_v"}
    unknown = [k for k in obj if k not in allowed]
    if unknown:
        raise DatasetParseError(f"{where}: unknown key {unknown[0]!r}")
    try:
        return TechnologyNode(
            name=str(obj["name"]),
            feature_size_nm=float(obj["feature_size_nm"]),
            voltage_v=float(obj["voltage_v"]),
        )
    except KeyError as exc:
        raise DatasetParseError(f"{where}: missing key {exc.args[0]!r}") from None


def save_transfer_samples(samples: Sequence[TransferSample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in samples:
            record = {
                "design_id": s.design_id,
                "source": _node_obj(s.source),
                "target": _node_obj(s.target),
                "source_power_w": s.source_power_w,
                "target_power_w": s.target_power_w,
            }
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


def load_transfer_samples(path: str | Path) -> tuple[TransferSample, ...]:
    path = Path(path)
    allowed = {"design_id", "source", "target", "source_power_w", "target_power_w"}
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"{where}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise DatasetParseError(f"{where}: record must be an object")
            unknown = [k for k in record if k not in allowed]
            if unknown:
                raise DatasetParseError(f"{where}: unknown key {unknown[0]!r}")
            missing = [k for k in allowed if k not in record]
            if missing:
                raise DatasetParseError(f"{where}: missing key {sorted(missing)[0]!r}")
            out.append(
                TransferSample(
                    design_id=str(record["design_id"]),
                    source=_node_from(record["source"], f"{where}.source"),
                    target=_node_from(record["target"], f"{where}.target"),
                    source_power_w=float(record["source_power_w"]),
                    target_power_w=float(record["target_power_w"]),
                )
            )
    return tuple(out)


def save_transfer_model(model: TransferModel, path: str | Path) -> None:
    obj = {
        "format": XFER_FORMAT_TAG,
        "train_options": train_options_to_obj(model.train_options),
        "ensemble": json.loads(serialize(model.ensemble).decode("utf-8")),
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


def load_transfer_model(path: str | Path) -> TransferModel:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path.name}: corrupt model bundle ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path.name}: corrupt model bundle")
    if obj.get("format") != XFER_FORMAT_TAG:
        raise ModelVersionError(
            f"{path.name}: unsupported bundle format {obj.get('format')!r}, expected {XFER_FORMAT_TAG!r}"
        )
    return TransferModel(
        ensemble=deserialize(json.dumps(obj["ensemble"], separators=(",", ":"))),
        train_options=train_options_from_obj(obj["train_options"]),
    )
