"""Per-component power model.

For each of the 13 components an ensemble is trained on that component's
configuration knobs and event-counter rates, with the label being measured
component power divided by the component's analytical resource amount.
Predicting multiplies the regressor output back by the resource amount and
floors at zero, and total power is the exact sum of the 13 component
predictions. Dividing out the resource amount removes most of the
configuration-driven spread from the label, which is what lets the
regressors generalize from a handful of training designs.

Feature construction is shared with the baseline and quality models: knob
features are used verbatim, and counter features are divided by numCycles
(and renamed with a ``_rate`` suffix) unless normalization is disabled.
numCycles itself is never normalized since it is the denominator.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .components import (
    COMPONENT_CONFIG_PARAMS,
    COMPONENT_EVENTS,
    ComponentId,
)
from .dataset import Dataset, DesignConfiguration, EventVector, Sample
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

logger = logging.getLogger(__name__)

MODEL_FORMAT_TAG = "panda-model-1"


class PowerModelError(ValueError):
    """Unusable training data or model state."""


@dataclass(frozen=True)
class ComponentFeatureSpec:
    """Which features one component's regressor consumes."""

    component: ComponentId
    config_features: tuple[str, ...]
    event_features: tuple[str, ...]
    normalize_events: bool = True

    def feature_names(self) -> tuple[str, ...]:
        names = list(self.config_features)
        for event in self.event_features:
            if self.normalize_events and event != "numCycles":
                names.append(f"{event}_rate")
            else:
                names.append(event)
        return tuple(names)


def default_feature_specs(normalize_events: bool = True) -> dict[ComponentId, ComponentFeatureSpec]:
    """The standard feature table: per-component knobs plus counters."""
    return {
        comp: ComponentFeatureSpec(
            component=comp,
            config_features=COMPONENT_CONFIG_PARAMS[comp],
            event_features=COMPONENT_EVENTS[comp],
            normalize_events=normalize_events,
        )
        for comp in ComponentId
    }


def build_features(
    spec: ComponentFeatureSpec,
    config: DesignConfiguration,
    events: EventVector,
) -> dict[str, float]:
    """Assemble one feature row, ordered config knobs then counters.

    Counters absent from the event vector are imputed as zero (logged at
    debug level); with normalization enabled numCycles must be positive.
    """
    row: dict[str, float] = {}
    for name in spec.config_features:
        row[name] = float(config.param(name))
    if spec.normalize_events:
        num_cycles = events.counts.get("numCycles", 0)
        if num_cycles <= 0:
            raise PowerModelError(
                f"cannot normalize events for {config.id}/{events.workload}: numCycles is not positive"
            )
    for event in spec.event_features:
        if event in events.counts:
            count = float(events.counts[event])
        else:
            count = 0.0
            logger.debug(
                "imputing 0 for absent counter %s on %s/%s", event, config.id, events.workload
            )
        if spec.normalize_events and event != "numCycles":
            row[f"{event}_rate"] = count / num_cycles
        else:
            row[event] = count
    return row


def feature_matrix(
    spec: ComponentFeatureSpec, samples: Sequence[Sample]
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Stack build_features rows into a matrix in spec order."""
    names = spec.feature_names()
    X = np.empty((len(samples), len(names)), dtype=np.float64)
    for i, sample in enumerate(samples):
        row = build_features(spec, sample.config, sample.events)
        for j, name in enumerate(names):
            X[i, j] = row[name]
    return X, names


@dataclass(frozen=True)
class PandaPowerModel:
    """Resource parameters plus one ensemble per component."""

    resource_params: ResourceParams
    feature_specs: Mapping[ComponentId, ComponentFeatureSpec]
    ensembles: Mapping[ComponentId, BoostedEnsemble]
    train_options: TrainOptions = field(default_factory=TrainOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_specs", dict(self.feature_specs))
        object.__setattr__(self, "ensembles", dict(self.ensembles))
        for comp in ComponentId:
            if comp not in self.ensembles:
                raise PowerModelError(f"model is missing the {comp.value} ensemble")
            if comp not in self.feature_specs:
                raise PowerModelError(f"model is missing the {comp.value} feature spec")
            expected = self.feature_specs[comp].feature_names()
            got = self.ensembles[comp].feature_names
            if got != expected:
                raise PowerModelError(
                    f"{comp.value} ensemble features {got} do not match spec {expected}"
                )
        if not self.resource_params.fitted:
            raise PowerModelError("model requires fitted resource parameters")


def train_panda(
    train: Dataset | Sequence[Sample],
    opts: TrainOptions = TrainOptions(),
    defaults: ResourceParams | None = None,
    *,
    normalize_events: bool = True,
) -> PandaPowerModel:
    """Fit resource biases, then one ratio regressor per component."""
    samples = train.samples if isinstance(train, Dataset) else tuple(train)
    if not samples:
        raise PowerModelError("training set is empty")
    for s in samples:
        if s.component_power_w is None:
            raise PowerModelError(
                f"sample {s.config.id}/{s.events.workload} lacks per-component power labels"
            )
    params = fit_resource_params(samples, defaults)
    specs = default_feature_specs(normalize_events=normalize_events)
    ensembles: dict[ComponentId, BoostedEnsemble] = {}
    for comp in ComponentId:
        spec = specs[comp]
        X, names = feature_matrix(spec, samples)
        y = np.empty(len(samples), dtype=np.float64)
        for i, s in enumerate(samples):
            y[i] = s.component_power_w[comp] / eval_resource(comp, s.config, params)
        ensembles[comp] = fit(X, y, opts, feature_names=names)
    return PandaPowerModel(
        resource_params=params,
        feature_specs=specs,
        ensembles=ensembles,
        train_options=opts,
    )


def predict_component_power(
    model: PandaPowerModel,
    component: ComponentId,
    config: DesignConfiguration,
    events: EventVector,
) -> float:
    """Regressor output times resource amount, floored at zero."""
    spec = model.feature_specs[component]
    row = build_features(spec, config, events)
    names = model.ensembles[component].feature_names
    vec = np.array([[row[n] for n in names]], dtype=np.float64)
    ratio = float(predict_matrix(model.ensembles[component], vec)[0])
    resource = eval_resource(component, config, model.resource_params)
    return max(0.0, ratio * resource)


def predict_total_power(
    model: PandaPowerModel,
    config: DesignConfiguration,
    events: EventVector,
) -> tuple[float, dict[ComponentId, float]]:
    """Total power and its per-component breakdown; the total is the exact
    sum of the breakdown values."""
    breakdown = {
        comp: predict_component_power(model, comp, config, events) for comp in ComponentId
    }
    total = 0.0
    for comp in ComponentId:
        total += breakdown[comp]
    return total, breakdown


def predict_total_power_batch(
    model: PandaPowerModel, samples: Sequence[Sample]
) -> np.ndarray:
    """Vectorized total-power prediction for many samples at once."""
    n = len(samples)
    total = np.zeros(n, dtype=np.float64)
    for comp in ComponentId:
        spec = model.feature_specs[comp]
        X, _ = feature_matrix(spec, samples)
        ratio = predict_matrix(model.ensembles[comp], X)
        resource = np.array(
            [eval_resource(comp, s.config, model.resource_params) for s in samples],
            dtype=np.float64,
        )
        total += np.maximum(0.0, ratio * resource)
    return total


# ---------------------------------------------------------------------------
# Model bundle serialization
# ---------------------------------------------------------------------------


def _spec_to_obj(spec: ComponentFeatureSpec) -> dict:
    return {
        "component": spec.component.value,
        "config_features": list(spec.config_features),
        "event_features": list(spec.event_features),
        "normalize_events": spec.normalize_events,
    }


def _spec_from_obj(obj: Mapping) -> ComponentFeatureSpec:
    return ComponentFeatureSpec(
        component=ComponentId(obj["component"]),
        config_features=tuple(obj["config_features"]),
        event_features=tuple(obj["event_features"]),
        normalize_events=bool(obj["normalize_events"]),
    )


def train_options_to_obj(opts: TrainOptions) -> dict:
    return {
        "n_trees": opts.n_trees,
        "max_depth": opts.max_depth,
        "learning_rate": opts.learning_rate,
        "l2_leaf_reg": opts.l2_leaf_reg,
        "min_samples_leaf": opts.min_samples_leaf,
    }


def train_options_from_obj(obj: Mapping) -> TrainOptions:
    return TrainOptions(
        n_trees=int(obj["n_trees"]),
        max_depth=int(obj["max_depth"]),
        learning_rate=float(obj["learning_rate"]),
        l2_leaf_reg=float(obj["l2_leaf_reg"]),
        min_samples_leaf=int(obj["min_samples_leaf"]),
    )


def save_panda_model(model: PandaPowerModel, path: str | Path) -> None:
    obj = {
        "format": MODEL_FORMAT_TAG,
        "resource_params": resource_params_to_obj(model.resource_params),
        "train_options": train_options_to_obj(model.train_options),
        "feature_specs": {c.value: _spec_to_obj(model.feature_specs[c]) for c in ComponentId},
        "components": {
            c.value: json.loads(serialize(model.ensembles[c]).decode("utf-8"))
            for c in ComponentId
        },
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


def load_panda_model(path: str | Path) -> PandaPowerModel:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path.name}: corrupt model bundle ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path.name}: corrupt model bundle")
    if obj.get("format") != MODEL_FORMAT_TAG:
        raise ModelVersionError(
            f"{path.name}: unsupported bundle format {obj.get('format')!r}, expected {MODEL_FORMAT_TAG!r}"
        )
    try:
        ensembles = {
            ComponentId(name): deserialize(json.dumps(tree_obj, separators=(",", ":")))
            for name, tree_obj in obj["components"].items()
        }
        specs = {ComponentId(name): _spec_from_obj(s) for name, s in obj["feature_specs"].items()}
        return PandaPowerModel(
            resource_params=resource_params_from_obj(obj["resource_params"]),
            feature_specs=specs,
            ensembles=ensembles,
            train_options=train_options_from_obj(obj["train_options"]),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path.name}: corrupt model bundle ({exc!r})") from None
