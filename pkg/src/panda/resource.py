"""Analytical resource functions.

Each modeled component has a closed-form resource amount derived from the
configuration knobs: a width, an entry count, a product of cache dimensions,
or such a quantity plus an additive bias for components whose cost has a
fixed part not visible in any single knob (the two TLBs and the residual
OtherLogic block). The learned regressors predict power divided by this
amount, so the resource function carries the first-order scaling and the
regressor only has to capture what is left.

Biases are fitted from training data: per biased component, the mean power
of each training configuration is regressed linearly against the driving
knob, and the bias is the x-axis offset intercept/slope (clamped at zero).
Degenerate training sets fall back to the provided defaults with a warning.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .components import BIASED_COMPONENTS, ComponentId
from .dataset import Dataset, DesignConfiguration, Sample


class ResourceError(ValueError):
    """Raised for unusable resource parameters or configurations."""


class ResourceFitWarning(UserWarning):
    """Emitted when bias fitting falls back to default values."""


@dataclass(frozen=True)
class ResourceParams:
    """Fitted constants consumed by the resource functions.

    ``reserve_station_lookup`` maps DecodeWidth to the issue-unit resource
    amount. ``None`` means the identity map (resource = DecodeWidth), which
    is the default when no microarchitecture-specific table is supplied.
    ``fitted`` records whether the biases were produced by fitting (or set
    deliberately); evaluating a biased component requires it.
    """

    itlb_bias: float = 0.0
    dtlb_bias: float = 0.0
    otherlogic_bias: float = 0.0
    reserve_station_lookup: Mapping[int, float] | None = None
    fitted: bool = False

    def __post_init__(self) -> None:
        for name in ("itlb_bias", "dtlb_bias", "otherlogic_bias"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise ResourceError(f"{name} must be finite and >= 0, got {value!r}")
        if self.reserve_station_lookup is not None:
            object.__setattr__(self, "reserve_station_lookup", dict(self.reserve_station_lookup))
            for width, amount in self.reserve_station_lookup.items():
                if not (isinstance(width, int) and width >= 1):
                    raise ResourceError(f"reserve_station_lookup key {width!r} must be a positive integer")
                if not (np.isfinite(amount) and amount > 0.0):
                    raise ResourceError(f"reserve_station_lookup[{width}] must be finite and > 0")

    def bias(self, component: ComponentId) -> float:
        if component is ComponentId.ITLB:
            return self.itlb_bias
        if component is ComponentId.DTLB:
            return self.dtlb_bias
        if component is ComponentId.OTHER_LOGIC:
            return self.otherlogic_bias
        raise ResourceError(f"component {component.value} has no bias")

    def reserve_station(self, decode_width: int) -> float:
        if self.reserve_station_lookup is None:
            return float(decode_width)
        try:
            return float(self.reserve_station_lookup[decode_width])
        except KeyError:
            raise ResourceError(
                f"reserve_station_lookup has no entry for DecodeWidth {decode_width}"
            ) from None


def default_resource_params() -> ResourceParams:
    return ResourceParams()


def eval_resource(
    component: ComponentId,
    config: DesignConfiguration,
    params: ResourceParams | None = None,
) -> float:
    """Evaluate one component's resource amount for a configuration.

    Components with a fitted bias (I-TLB, D-TLB, OtherLogic) require
    ``params.fitted``; the remaining ten are pure functions of the knobs.
    The result is always finite and strictly positive.
    """
    if params is None:
        params = default_resource_params()
    if component in BIASED_COMPONENTS and not params.fitted:
        raise ResourceError(
            f"component {component.value} needs fitted bias parameters; "
            "call fit_resource_params or construct ResourceParams with fitted=True"
        )
    c = config
    if component is ComponentId.BP:
        return float(c.FetchWidth)
    if component is ComponentId.IFU:
        return float(c.DecodeWidth)
    if component is ComponentId.ITLB:
        return float(c.DTLBEntry) + params.itlb_bias
    if component is ComponentId.ICACHE:
        return float(c.ICacheWay * c.ICacheFetchBytes)
    if component is ComponentId.RNU:
        return float(c.DecodeWidth)
    if component is ComponentId.ROB:
        return float(c.RobEntry)
    if component is ComponentId.ISU:
        return params.reserve_station(c.DecodeWidth)
    if component is ComponentId.REGFILE:
        return float(c.IntPhyRegister + c.FpPhyRegister)
    if component is ComponentId.FUPOOL:
        return 1.0
    if component is ComponentId.LSU:
        return float(c.LDQEntry + c.STQEntry)
    if component is ComponentId.DTLB:
        return float(c.DTLBEntry) + params.dtlb_bias
    if component is ComponentId.DCACHE:
        return float(c.DCacheWay * c.MemIssueWidth)
    if component is ComponentId.OTHER_LOGIC:
        return float(c.DecodeWidth) + params.otherlogic_bias
    raise ResourceError(f"unknown component {component!r}")


# Knob regressed against when fitting each bias.
_BIAS_DRIVER = {
    ComponentId.ITLB: "DTLBEntry",
    ComponentId.DTLB: "DTLBEntry",
    ComponentId.OTHER_LOGIC: "DecodeWidth",
}


def fit_resource_params(
    train: Dataset | Sequence[Sample],
    defaults: ResourceParams | None = None,
) -> ResourceParams:
    """Fit the three biases from labeled training samples.

    Per biased component, each training configuration contributes one point
    (driving knob value, mean component power across its workloads). A line
    a*x + c is fitted by least squares and the bias is c/a clamped to zero.
    Fewer than two distinct knob values, or a non-positive slope, triggers a
    fallback to the default bias with a ResourceFitWarning.
    """
    samples = train.samples if isinstance(train, Dataset) else tuple(train)
    if defaults is None:
        defaults = default_resource_params()
    if not samples:
        raise ResourceError("cannot fit resource parameters from an empty training set")
    for s in samples:
        if s.component_power_w is None:
            raise ResourceError(
                f"sample {s.config.id}/{s.events.workload} lacks per-component power labels"
            )

    biases = {}
    for component in BIASED_COMPONENTS:
        driver = _BIAS_DRIVER[component]
        acc: dict[str, tuple[DesignConfiguration, list[float]]] = {}
        for s in samples:
            entry = acc.setdefault(s.config.id, (s.config, []))
            entry[1].append(s.component_power_w[component])
        xs = np.array([cfg.param(driver) for cfg, _ in acc.values()], dtype=np.float64)
        ys = np.array([float(np.mean(powers)) for _, powers in acc.values()], dtype=np.float64)
        if len(np.unique(xs)) < 2:
            warnings.warn(
                f"{component.value}: only one distinct {driver} value in training data, "
                f"keeping default bias {defaults.bias(component)}",
                ResourceFitWarning,
                stacklevel=2,
            )
            biases[component] = defaults.bias(component)
            continue
        slope, intercept = np.polyfit(xs, ys, 1)
        if not (np.isfinite(slope) and slope > 0.0):
            warnings.warn(
                f"{component.value}: non-positive fitted slope {slope!r}, "
                f"keeping default bias {defaults.bias(component)}",
                ResourceFitWarning,
                stacklevel=2,
            )
            biases[component] = defaults.bias(component)
            continue
        biases[component] = max(0.0, float(intercept / slope))

    return ResourceParams(
        itlb_bias=biases[ComponentId.ITLB],
        dtlb_bias=biases[ComponentId.DTLB],
        otherlogic_bias=biases[ComponentId.OTHER_LOGIC],
        reserve_station_lookup=defaults.reserve_station_lookup,
        fitted=True,
    )


# ---------------------------------------------------------------------------
# Resource configuration file
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {"reserve_station_lookup", "default_biases"}
_BIAS_KEYS = {"itlb", "dtlb", "other_logic"}


def load_resource_config(path: str | Path) -> ResourceParams:
    """Read default biases and an optional reserve-station table from JSON.

    The file holds ``{"reserve_station_lookup": {"1": ..., ...},
    "default_biases": {"itlb": ..., "dtlb": ..., "other_logic": ...}}``;
    both keys are optional. The result is an unfitted ResourceParams meant
    to be passed as the defaults of fit_resource_params.
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ResourceError(f"{path.name}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ResourceError(f"{path.name}: expected a JSON object")
    unknown = [k for k in obj if k not in _CONFIG_KEYS]
    if unknown:
        raise ResourceError(f"{path.name}: unknown key {unknown[0]!r}")

    lookup = None
    if "reserve_station_lookup" in obj:
        raw = obj["reserve_station_lookup"]
        if not isinstance(raw, dict):
            raise ResourceError(f"{path.name}: reserve_station_lookup must be an object")
        lookup = {}
        for key, value in raw.items():
            try:
                width = int(key)
            except ValueError:
                raise ResourceError(f"{path.name}: bad DecodeWidth key {key!r}") from None
            lookup[width] = float(value)

    biases = {"itlb": 0.0, "dtlb": 0.0, "other_logic": 0.0}
    if "default_biases" in obj:
        raw = obj["default_biases"]
        if not isinstance(raw, dict):
            raise ResourceError(f"{path.name}: default_biases must be an object")
        unknown = [k for k in raw if k not in _BIAS_KEYS]
        if unknown:
            raise ResourceError(f"{path.name}: unknown bias key {unknown[0]!r}")
        for key in _BIAS_KEYS:
            if key in raw:
                biases[key] = float(raw[key])

    return ResourceParams(
        itlb_bias=biases["itlb"],
        dtlb_bias=biases["dtlb"],
        otherlogic_bias=biases["other_logic"],
        reserve_station_lookup=lookup,
        fitted=False,
    )


def save_resource_config(params: ResourceParams, path: str | Path) -> None:
    obj: dict = {
        "default_biases": {
            "itlb": params.itlb_bias,
            "dtlb": params.dtlb_bias,
            "other_logic": params.otherlogic_bias,
        }
    }
    if params.reserve_station_lookup is not None:
        obj["reserve_station_lookup"] = {
            str(k): v for k, v in sorted(params.reserve_station_lookup.items())
        }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def resource_params_to_obj(params: ResourceParams) -> dict:
    """JSON-ready encoding used inside model bundles."""
    return {
        "itlb_bias": params.itlb_bias,
        "dtlb_bias": params.dtlb_bias,
        "otherlogic_bias": params.otherlogic_bias,
        "reserve_station_lookup": None
        if params.reserve_station_lookup is None
        else {str(k): v for k, v in sorted(params.reserve_station_lookup.items())},
        "fitted": params.fitted,
    }


def resource_params_from_obj(obj: Mapping) -> ResourceParams:
    lookup = obj.get("reserve_station_lookup")
    if lookup is not None:
        lookup = {int(k): float(v) for k, v in lookup.items()}
    return ResourceParams(
        itlb_bias=float(obj["itlb_bias"]),
        dtlb_bias=float(obj["dtlb_bias"]),
        otherlogic_bias=float(obj["otherlogic_bias"]),
        reserve_station_lookup=lookup,
        fitted=bool(obj["fitted"]),
    )
