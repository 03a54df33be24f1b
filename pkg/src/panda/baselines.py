"""Baseline power models.

Three reference points the per-component resource-scaled model is compared
against:

* ``GlobalMlModel``: one ensemble over every knob and every counter,
  predicting total power directly.
* ``ComponentMlModel``: one ensemble per component on the same features as
  the main model but predicting raw component power (no resource scaling).
* ``AnalyticalLinearModel``: per component, a least-squares line through
  (resource amount, workload-averaged power); purely analytical, so its
  predictions do not depend on the workload at all.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .components import CONFIG_PARAM_NAMES, EVENT_REGISTRY, ComponentId
from .dataset import Dataset, DesignConfiguration, EventVector, Sample
from .power_model import (
    ComponentFeatureSpec,
    build_features,
    default_feature_specs,
    feature_matrix,
    train_options_from_obj,
    train_options_to_obj,
)
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
from .resource import (
    ResourceParams,
    eval_resource,
    fit_resource_params,
    resource_params_from_obj,
    resource_params_to_obj,
)

GLOBAL_FORMAT_TAG = "panda-global-ml-1"
COMPONENT_FORMAT_TAG = "panda-component-ml-1"
ANALYTICAL_FORMAT_TAG = "panda-analytical-1"


class BaselineError(ValueError):
    pass


class BaselineFitWarning(UserWarning):
    """Emitted when a degenerate fit falls back to an underdetermined line."""


def global_feature_spec(normalize_events: bool = True) -> ComponentFeatureSpec:
    """All knobs plus all counters; reuses the OtherLogic slot since that
    component already sees everything."""
    return ComponentFeatureSpec(
        component=ComponentId.OTHER_LOGIC,
        config_features=CONFIG_PARAM_NAMES,
        event_features=EVENT_REGISTRY,
        normalize_events=normalize_events,
    )


def _check_samples(train: Dataset | Sequence[Sample], need_components: bool) -> tuple[Sample, ...]:
    samples = train.samples if isinstance(train, Dataset) else tuple(train)
    if not samples:
        raise BaselineError("training set is empty")
    if need_components:
        for s in samples:
            if s.component_power_w is None:
                raise BaselineError(
                    f"sample {s.config.id}/{s.events.workload} lacks per-component power labels"
                )
    return samples


# ---------------------------------------------------------------------------
# Global ML
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GlobalMlModel:
    spec: ComponentFeatureSpec
    ensemble: BoostedEnsemble
    train_options: TrainOptions = field(default_factory=TrainOptions)


def train_global_ml(
    train: Dataset | Sequence[Sample],
    opts: TrainOptions = TrainOptions(),
    *,
    normalize_events: bool = True,
) -> GlobalMlModel:
    samples = _check_samples(train, need_components=False)
    spec = global_feature_spec(normalize_events)
    X, names = feature_matrix(spec, samples)
    y = np.array([s.total_power_w for s in samples], dtype=np.float64)
    return GlobalMlModel(
        spec=spec, ensemble=fit(X, y, opts, feature_names=names), train_options=opts
    )


def predict_global_ml(
    model: GlobalMlModel, config: DesignConfiguration, events: EventVector
) -> float:
    row = build_features(model.spec, config, events)
    vec = np.array([[row[n] for n in model.ensemble.feature_names]], dtype=np.float64)
    return max(0.0, float(predict_matrix(model.ensemble, vec)[0]))


def predict_global_ml_batch(model: GlobalMlModel, samples: Sequence[Sample]) -> np.ndarray:
    X, _ = feature_matrix(model.spec, samples)
    return np.maximum(0.0, predict_matrix(model.ensemble, X))


# ---------------------------------------------------------------------------
# Component ML
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComponentMlModel:
    feature_specs: Mapping[ComponentId, ComponentFeatureSpec]
    ensembles: Mapping[ComponentId, BoostedEnsemble]
    train_options: TrainOptions = field(default_factory=TrainOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_specs", dict(self.feature_specs))
        object.__setattr__(self, "ensembles", dict(self.ensembles))
        missing = [c for c in ComponentId if c not in self.ensembles]
        if missing:
            raise BaselineError(f"component model missing {missing[0].value} ensemble")


def train_component_ml(
    train: Dataset | Sequence[Sample],
    opts: TrainOptions = TrainOptions(),
    *,
    normalize_events: bool = True,
) -> ComponentMlModel:
    samples = _check_samples(train, need_components=True)
    specs = default_feature_specs(normalize_events=normalize_events)
    ensembles = {}
    for comp in ComponentId:
        X, names = feature_matrix(specs[comp], samples)
        y = np.array([s.component_power_w[comp] for s in samples], dtype=np.float64)
        ensembles[comp] = fit(X, y, opts, feature_names=names)
    return ComponentMlModel(feature_specs=specs, ensembles=ensembles, train_options=opts)


def predict_component_ml(
    model: ComponentMlModel, config: DesignConfiguration, events: EventVector
) -> tuple[float, dict[ComponentId, float]]:
    breakdown = {}
    for comp in ComponentId:
        row = build_features(model.feature_specs[comp], config, events)
        names = model.ensembles[comp].feature_names
        vec = np.array([[row[n] for n in names]], dtype=np.float64)
        breakdown[comp] = max(0.0, float(predict_matrix(model.ensembles[comp], vec)[0]))
    total = 0.0
    for comp in ComponentId:
        total += breakdown[comp]
    return total, breakdown


def predict_component_ml_batch(model: ComponentMlModel, samples: Sequence[Sample]) -> np.ndarray:
    total = np.zeros(len(samples), dtype=np.float64)
    for comp in ComponentId:
        X, _ = feature_matrix(model.feature_specs[comp], samples)
        total += np.maximum(0.0, predict_matrix(model.ensembles[comp], X))
    return total


# ---------------------------------------------------------------------------
# Analytical linear
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticalLinearModel:
    """slope * resource + intercept per component; workload-independent."""

    per_component: Mapping[ComponentId, tuple[float, float]]
    resource_params: ResourceParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_component", dict(self.per_component))
        missing = [c for c in ComponentId if c not in self.per_component]
        if missing:
            raise BaselineError(f"analytical model missing {missing[0].value} line")


def train_analytical(
    train: Dataset | Sequence[Sample],
    defaults: ResourceParams | None = None,
) -> AnalyticalLinearModel:
    """Least squares of workload-averaged component power against the
    resource amount; a single distinct amount leaves the intercept
    underdetermined, so the fit degenerates to a line through the origin."""
    samples = _check_samples(train, need_components=True)
    params = fit_resource_params(samples, defaults)
    per_config: dict[str, tuple[DesignConfiguration, list[Sample]]] = {}
    for s in samples:
        per_config.setdefault(s.config.id, (s.config, []))[1].append(s)

    lines = {}
    for comp in ComponentId:
        xs = []
        ys = []
        for config, group in per_config.values():
            xs.append(eval_resource(comp, config, params))
            ys.append(float(np.mean([g.component_power_w[comp] for g in group])))
        xs = np.array(xs, dtype=np.float64)
        ys = np.array(ys, dtype=np.float64)
        if len(np.unique(xs)) < 2:
            warnings.warn(
                f"{comp.value}: single distinct resource amount, fitting through the origin",
                BaselineFitWarning,
                stacklevel=2,
            )
            amount = float(xs[0])
            if amount > 0.0:
                lines[comp] = (float(np.mean(ys)) / amount, 0.0)
            else:
                lines[comp] = (0.0, float(np.mean(ys)))
        else:
            slope, intercept = np.polyfit(xs, ys, 1)
            lines[comp] = (float(slope), float(intercept))
    return AnalyticalLinearModel(per_component=lines, resource_params=params)


def predict_analytical(
    model: AnalyticalLinearModel, config: DesignConfiguration
) -> tuple[float, dict[ComponentId, float]]:
    breakdown = {}
    for comp in ComponentId:
        slope, intercept = model.per_component[comp]
        amount = eval_resource(comp, config, model.resource_params)
        breakdown[comp] = max(0.0, slope * amount + intercept)
    total = 0.0
    for comp in ComponentId:
        total += breakdown[comp]
    return total, breakdown


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _spec_obj(spec: ComponentFeatureSpec) -> dict:
    return {
        "component": spec.component.value,
        "config_features": list(spec.config_features),
        "event_features": list(spec.event_features),
        "normalize_events": spec.normalize_events,
    }


def _spec_from(obj: Mapping) -> ComponentFeatureSpec:
    return ComponentFeatureSpec(
        component=ComponentId(obj["component"]),
        config_features=tuple(obj["config_features"]),
        event_features=tuple(obj["event_features"]),
        normalize_events=bool(obj["normalize_events"]),
    )


def _load_bundle(path: Path, expected_tag: str) -> dict:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path.name}: corrupt model bundle ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path.name}: corrupt model bundle")
    if obj.get("format") != expected_tag:
        raise ModelVersionError(
            f"{path.name}: unsupported bundle format {obj.get('format')!r}, expected {expected_tag!r}"
        )
    return obj


def save_global_ml(model: GlobalMlModel, path: str | Path) -> None:
    obj = {
        "format": GLOBAL_FORMAT_TAG,
        "train_options": train_options_to_obj(model.train_options),
        "spec": _spec_obj(model.spec),
        "ensemble": json.loads(serialize(model.ensemble).decode("utf-8")),
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


def load_global_ml(path: str | Path) -> GlobalMlModel:
    obj = _load_bundle(Path(path), GLOBAL_FORMAT_TAG)
    return GlobalMlModel(
        spec=_spec_from(obj["spec"]),
        ensemble=deserialize(json.dumps(obj["ensemble"], separators=(",", ":"))),
        train_options=train_options_from_obj(obj["train_options"]),
    )


def save_component_ml(model: ComponentMlModel, path: str | Path) -> None:
    obj = {
        "format": COMPONENT_FORMAT_TAG,
        "train_options": train_options_to_obj(model.train_options),
        "feature_specs": {c.value: _spec_obj(model.feature_specs[c]) for c in ComponentId},
        "components": {
            c.value: json.loads(serialize(model.ensembles[c]).decode("utf-8")) for c in ComponentId
        },
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


def load_component_ml(path: str | Path) -> ComponentMlModel:
    obj = _load_bundle(Path(path), COMPONENT_FORMAT_TAG)
    return ComponentMlModel(
        feature_specs={ComponentId(k): _spec_from(v) for k, v in obj["feature_specs"].items()},
        ensembles={
            ComponentId(k): deserialize(json.dumps(v, separators=(",", ":")))
            for k, v in obj["components"].items()
        },
        train_options=train_options_from_obj(obj["train_options"]),
    )


def save_analytical(model: AnalyticalLinearModel, path: str | Path) -> None:
    obj = {
        "format": ANALYTICAL_FORMAT_TAG,
        "resource_params": resource_params_to_obj(model.resource_params),
        "per_component": {
            c.value: list(model.per_component[c]) for c in ComponentId
        },
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


def load_analytical(path: str | Path) -> AnalyticalLinearModel:
    obj = _load_bundle(Path(path), ANALYTICAL_FORMAT_TAG)
    return AnalyticalLinearModel(
        per_component={
            ComponentId(k): (float(v[0]), float(v[1])) for k, v in obj["per_component"].items()
        },
        resource_params=resource_params_from_obj(obj["resource_params"]),
    )
