"""Area, cycle-count, and energy prediction.

Area is a configuration-only quantity: one ensemble per component trained
on that component's knobs, with duplicate rows for the same design (one per
workload) collapsed to a single training row. An optional mode divides the
label by the component's resource amount, mirroring the power model.

Cycle counts come from calibrating a fast baseline simulator: the model
learns the ratio of measured cycles to the simulator's own cycle count from
the knobs and ten timing-related counters, and prediction multiplies the
ratio back onto the simulator count (never below one cycle).

Energy is simply predicted power times predicted time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .components import (
    COMPONENT_CONFIG_PARAMS,
    CONFIG_PARAM_NAMES,
    PERF_EVENTS,
    ComponentId,
)
from .dataset import Dataset, DesignConfiguration, EventVector, Sample
from .power_model import (
    ComponentFeatureSpec,
    PandaPowerModel,
    build_features,
    predict_total_power,
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

AREA_FORMAT_TAG = "panda-area-1"
PERF_FORMAT_TAG = "panda-perf-1"


class QualityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Area
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AreaModel:
    """Per-component area regressors over configuration knobs only."""

    ensembles: Mapping[ComponentId, BoostedEnsemble]
    use_resource_factor: bool = False
    resource_params: ResourceParams | None = None
    train_options: TrainOptions = field(default_factory=TrainOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ensembles", dict(self.ensembles))
        missing = [c for c in ComponentId if c not in self.ensembles]
        if missing:
            raise QualityError(f"area model missing {missing[0].value} ensemble")
        if self.use_resource_factor and self.resource_params is None:
            raise QualityError("resource-factor area model needs resource parameters")


def _area_features(comp: ComponentId, config: DesignConfiguration) -> np.ndarray:
    names = COMPONENT_CONFIG_PARAMS[comp]
    return np.array([[float(config.param(n)) for n in names]], dtype=np.float64)


def train_area(
    train: Dataset | Sequence[Sample],
    opts: TrainOptions = TrainOptions(),
    *,
    use_resource_factor: bool = False,
    defaults: ResourceParams | None = None,
) -> AreaModel:
    """One row per distinct design; label is component area, optionally
    divided by the resource amount."""
    samples = train.samples if isinstance(train, Dataset) else tuple(train)
    if not samples:
        raise QualityError("training set is empty")
    per_config: dict[str, Sample] = {}
    for s in samples:
        if s.component_area_um2 is None:
            raise QualityError(
                f"sample {s.config.id}/{s.events.workload} lacks component area labels"
            )
        prev = per_config.setdefault(s.config.id, s)
        if prev.component_area_um2 != s.component_area_um2:
            raise QualityError(
                f"config {s.config.id}: area labels differ across workloads"
            )
    configs = [s.config for s in per_config.values()]
    areas = [s.component_area_um2 for s in per_config.values()]

    params = None
    if use_resource_factor:
        params = fit_resource_params(samples, defaults)

    ensembles = {}
    for comp in ComponentId:
        names = COMPONENT_CONFIG_PARAMS[comp]
        X = np.array(
            [[float(cfg.param(n)) for n in names] for cfg in configs], dtype=np.float64
        )
        y = np.empty(len(configs), dtype=np.float64)
        for i, (cfg, area) in enumerate(zip(configs, areas)):
            label = area[comp]
            if use_resource_factor:
                label = label / eval_resource(comp, cfg, params)
            y[i] = label
        ensembles[comp] = fit(X, y, opts, feature_names=names)
    return AreaModel(
        ensembles=ensembles,
        use_resource_factor=use_resource_factor,
        resource_params=params,
        train_options=opts,
    )


def predict_component_area(model: AreaModel, component: ComponentId, config: DesignConfiguration) -> float:
    vec = _area_features(component, config)
    pred = float(predict_matrix(model.ensembles[component], vec)[0])
    if model.use_resource_factor:
        pred *= eval_resource(component, config, model.resource_params)
    return max(0.0, pred)


def predict_total_area(model: AreaModel, config: DesignConfiguration) -> tuple[float, dict[ComponentId, float]]:
    breakdown = {
        comp: predict_component_area(model, comp, config) for comp in ComponentId
    }
    total = 0.0
    for comp in ComponentId:
        total += breakdown[comp]
    return total, breakdown


# ---------------------------------------------------------------------------
# Cycle calibration
# ---------------------------------------------------------------------------


def perf_feature_spec(normalize_events: bool = True) -> ComponentFeatureSpec:
    """All knobs plus the ten calibration counters. The OtherLogic slot is
    borrowed; only the feature lists matter here."""
    return ComponentFeatureSpec(
        component=ComponentId.OTHER_LOGIC,
        config_features=CONFIG_PARAM_NAMES,
        event_features=PERF_EVENTS,
        normalize_events=normalize_events,
    )


@dataclass(frozen=True)
class PerfCalibrator:
    spec: ComponentFeatureSpec
    ensemble: BoostedEnsemble
    train_options: TrainOptions = field(default_factory=TrainOptions)


def train_perf(
    train: Dataset | Sequence[Sample],
    opts: TrainOptions = TrainOptions(),
    *,
    normalize_events: bool = True,
) -> PerfCalibrator:
    """Learn measured cycles / baseline cycles."""
    samples = train.samples if isinstance(train, Dataset) else tuple(train)
    if not samples:
        raise QualityError("training set is empty")
    for s in samples:
        if s.true_cycles is None:
            raise QualityError(
                f"sample {s.config.id}/{s.events.workload} lacks a measured cycle label"
            )
    spec = perf_feature_spec(normalize_events)
    names = spec.feature_names()
    X = np.empty((len(samples), len(names)), dtype=np.float64)
    y = np.empty(len(samples), dtype=np.float64)
    for i, s in enumerate(samples):
        row = build_features(spec, s.config, s.events)
        for j, name in enumerate(names):
            X[i, j] = row[name]
        y[i] = s.true_cycles / s.events.baseline_cycles
    return PerfCalibrator(spec=spec, ensemble=fit(X, y, opts, feature_names=names), train_options=opts)


def predict_cycles(model: PerfCalibrator, config: DesignConfiguration, events: EventVector) -> float:
    """Calibrated cycle count: predicted ratio times the baseline count,
    floored at one cycle."""
    row = build_features(model.spec, config, events)
    vec = np.array([[row[n] for n in model.ensemble.feature_names]], dtype=np.float64)
    ratio = float(predict_matrix(model.ensemble, vec)[0])
    return max(1.0, ratio * events.baseline_cycles)


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------


def predict_energy(
    power_model: PandaPowerModel,
    perf_model: PerfCalibrator,
    config: DesignConfiguration,
    events: EventVector,
) -> float:
    """Joules: predicted watts times predicted seconds."""
    total_power, _ = predict_total_power(power_model, config, events)
    cycles = predict_cycles(perf_model, config, events)
    return total_power * cycles / events.frequency_hz


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_area_model(model: AreaModel, path: str | Path) -> None:
    obj = {
        "format": AREA_FORMAT_TAG,
        "use_resource_factor": model.use_resource_factor,
        "resource_params": None
        if model.resource_params is None
        else resource_params_to_obj(model.resource_params),
        "train_options": train_options_to_obj(model.train_options),
        "components": {
            c.value: json.loads(serialize(model.ensembles[c]).decode("utf-8")) for c in ComponentId
        },
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


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


def load_area_model(path: str | Path) -> AreaModel:
    obj = _load_bundle(Path(path), AREA_FORMAT_TAG)
    params = obj.get("resource_params")
    return AreaModel(
        ensembles={
            ComponentId(k): deserialize(json.dumps(v, separators=(",", ":")))
            for k, v in obj["components"].items()
        },
        use_resource_factor=bool(obj["use_resource_factor"]),
        resource_params=None if params is None else resource_params_from_obj(params),
        train_options=train_options_from_obj(obj["train_options"]),
    )


def save_perf_model(model: PerfCalibrator, path: str | Path) -> None:
    obj = {
        "format": PERF_FORMAT_TAG,
        "train_options": train_options_to_obj(model.train_options),
        "spec": {
            "config_features": list(model.spec.config_features),
            "event_features": list(model.spec.event_features),
            "normalize_events": model.spec.normalize_events,
        },
        "ensemble": json.loads(serialize(model.ensemble).decode("utf-8")),
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


def load_perf_model(path: str | Path) -> PerfCalibrator:
    obj = _load_bundle(Path(path), PERF_FORMAT_TAG)
    spec_obj = obj["spec"]
    spec = ComponentFeatureSpec(
        component=ComponentId.OTHER_LOGIC,
        config_features=tuple(spec_obj["config_features"]),
        event_features=tuple(spec_obj["event_features"]),
        normalize_events=bool(spec_obj["normalize_events"]),
    )
    return PerfCalibrator(
        spec=spec,
        ensemble=deserialize(json.dumps(obj["ensemble"], separators=(",", ":"))),
        train_options=train_options_from_obj(obj["train_options"]),
    )
