"""Synthetic ground-truth generator.

Produces labeled datasets with known structure so every model in the
package can be validated against an oracle. Per component the power law is

    power = base + resource_coef * F^nonlinearity * (1 + activity_coef * rate) * (1 + eps)

where F is the component's analytical resource amount under the generator's
own (true) resource parameters, ``rate`` is the mean per-cycle rate of the
component's event counters, and eps is uniform in +-noise_rel. Total power
is exactly the sum of the component values. Cycle counts follow a smooth
speed model of the configuration; the baseline simulator's cycle count
deviates from the true count by a smooth configuration-dependent ratio in
[1.1, 1.4] (plus jitter), which is precisely what the cycle calibrator is
supposed to learn. Areas follow affine laws in the resource amounts with a
workload-independent value per design.

Everything is deterministic: each (seed, configuration, workload) triple
keys its own random stream, so generation order never matters, and workload
profiles are fixed constants derived from stable hashes. The noiseless
parts of the laws are exposed as oracle functions for use as ground truth
in design-space exploration tests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .components import COMPONENT_EVENTS, CONFIG_PARAM_NAMES, EVENT_REGISTRY, ComponentId
from .dataset import (
    Dataset,
    DesignConfiguration,
    EventVector,
    Sample,
    TechnologyNode,
    builtin_configurations,
)
from .resource import ResourceParams, eval_resource
from .transfer import TransferSample

DEFAULT_WORKLOAD_NAMES = (
    "dhrystone",
    "median",
    "multiply",
    "qsort",
    "rsort",
    "towers",
    "spmv",
    "vvadd",
)

# Per-parameter maxima over the built-in C1..C15 designs, used to place any
# configuration on a common [0, ~1] size scale.
_PARAM_SCALE: dict[str, float] = {
    "FetchWidth": 8.0,
    "DecodeWidth": 5.0,
    "FetchBufferEntry": 40.0,
    "RobEntry": 140.0,
    "IntPhyRegister": 140.0,
    "FpPhyRegister": 140.0,
    "LDQEntry": 36.0,
    "STQEntry": 36.0,
    "BranchCount": 20.0,
    "MemIssueWidth": 2.0,
    "FpIssueWidth": 2.0,
    "IntIssueWidth": 5.0,
    "DCacheWay": 8.0,
    "ICacheWay": 8.0,
    "DTLBEntry": 32.0,
    "DCacheMSHR": 8.0,
    "ICacheFetchBytes": 4.0,
}

_MASK63 = (1 << 63) - 1


class SynthError(ValueError):
    pass


def _unit_hash(text: str) -> float:
    """Stable uniform value in [0, 1) derived from a string."""
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return int(digest[:16], 16) / float(1 << 64)


def _stream_key(text: str) -> int:
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return int(digest[:16], 16) & _MASK63


def config_size_score(config: DesignConfiguration) -> float:
    """Mean of the knobs on their common scale; ~0.28 for C1, 1.0 for C15."""
    total = 0.0
    for name in CONFIG_PARAM_NAMES:
        total += config.param(name) / _PARAM_SCALE[name]
    return total / len(CONFIG_PARAM_NAMES)


@dataclass(frozen=True)
class ComponentLaw:
    """Parameters of one component's generating law."""

    base: float
    resource_coef: float
    activity_coef: float
    nonlinearity: float = 1.0

    def __post_init__(self) -> None:
        if not (self.base >= 0.0 and self.resource_coef >= 0.0):
            raise SynthError("base and resource_coef must be >= 0")
        if not (self.activity_coef >= 0.0):
            raise SynthError("activity_coef must be >= 0")
        if not (0.5 <= self.nonlinearity <= 2.0):
            raise SynthError("nonlinearity expected near 1 (allowed range [0.5, 2])")


@dataclass(frozen=True)
class WorkloadProfile:
    """Fixed per-workload activity profile.

    ``rates`` holds each counter's mean per-cycle rate; ``amps`` holds how
    strongly that rate responds to design size. ``base_cycles`` sets the
    workload's length and ``size_sensitivity`` how much it speeds up on
    larger designs.
    """

    name: str
    base_cycles: int
    size_sensitivity: float
    rates: Mapping[str, float]
    amps: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates", dict(self.rates))
        object.__setattr__(self, "amps", dict(self.amps))
        if self.base_cycles < 1:
            raise SynthError("base_cycles must be >= 1")


def _rate_range(event: str) -> tuple[float, float]:
    lowered = event.lower()
    if "miss" in lowered or "mshr" in lowered or "incorrect" in lowered:
        return 0.0005, 0.03
    if "cycles" in lowered:
        return 0.1, 0.8
    return 0.02, 0.7


def make_workload_profile(name: str) -> WorkloadProfile:
    """Derive a profile from the workload name alone (stable constants)."""
    rates = {}
    amps = {}
    for event in EVENT_REGISTRY:
        if event == "numCycles":
            continue
        lo, hi = _rate_range(event)
        rates[event] = lo + (hi - lo) * _unit_hash(f"rate:{name}:{event}")
        amps[event] = 0.7 * (2.0 * _unit_hash(f"amp:{name}:{event}") - 1.0) / 2.0
    base_cycles = int(120_000 + 360_000 * _unit_hash(f"cycles:{name}"))
    sensitivity = 0.25 * _unit_hash(f"sens:{name}")
    return WorkloadProfile(
        name=name,
        base_cycles=base_cycles,
        size_sensitivity=sensitivity,
        rates=rates,
        amps=amps,
    )


def default_workload_profiles() -> tuple[WorkloadProfile, ...]:
    return tuple(make_workload_profile(name) for name in DEFAULT_WORKLOAD_NAMES)


def default_component_laws() -> dict[ComponentId, ComponentLaw]:
    return {
        ComponentId.BP: ComponentLaw(0.0, 0.006, 0.5),
        ComponentId.IFU: ComponentLaw(0.0, 0.014, 0.6),
        ComponentId.ITLB: ComponentLaw(0.0, 0.0011, 0.4),
        ComponentId.ICACHE: ComponentLaw(0.0, 0.0035, 0.5, nonlinearity=1.05),
        ComponentId.RNU: ComponentLaw(0.0, 0.011, 0.4),
        ComponentId.ROB: ComponentLaw(0.0, 0.0009, 0.5),
        ComponentId.ISU: ComponentLaw(0.0, 0.016, 0.6),
        ComponentId.REGFILE: ComponentLaw(0.0, 0.00045, 0.5),
        ComponentId.FUPOOL: ComponentLaw(0.02, 0.04, 2.0),
        ComponentId.LSU: ComponentLaw(0.0, 0.0016, 0.5),
        ComponentId.DTLB: ComponentLaw(0.0, 0.0013, 0.5),
        ComponentId.DCACHE: ComponentLaw(0.0, 0.0085, 0.7, nonlinearity=1.05),
        ComponentId.OTHER_LOGIC: ComponentLaw(0.0, 0.028, 0.3),
    }


def default_area_laws() -> dict[ComponentId, ComponentLaw]:
    """Affine area laws in square micrometers (activity plays no role)."""
    return {
        ComponentId.BP: ComponentLaw(9_000.0, 900.0, 0.0),
        ComponentId.IFU: ComponentLaw(14_000.0, 2_200.0, 0.0),
        ComponentId.ITLB: ComponentLaw(2_500.0, 120.0, 0.0),
        ComponentId.ICACHE: ComponentLaw(30_000.0, 1_800.0, 0.0),
        ComponentId.RNU: ComponentLaw(4_000.0, 700.0, 0.0),
        ComponentId.ROB: ComponentLaw(12_000.0, 180.0, 0.0),
        ComponentId.ISU: ComponentLaw(9_000.0, 1_600.0, 0.0),
        ComponentId.REGFILE: ComponentLaw(9_000.0, 90.0, 0.0),
        ComponentId.FUPOOL: ComponentLaw(26_000.0, 5_000.0, 0.0),
        ComponentId.LSU: ComponentLaw(8_000.0, 260.0, 0.0),
        ComponentId.DTLB: ComponentLaw(2_600.0, 130.0, 0.0),
        ComponentId.DCACHE: ComponentLaw(34_000.0, 2_400.0, 0.0),
        ComponentId.OTHER_LOGIC: ComponentLaw(30_000.0, 4_500.0, 0.0),
    }


def true_resource_params() -> ResourceParams:
    """The generator's ground-truth biases (identity issue-unit lookup)."""
    return ResourceParams(itlb_bias=4.0, dtlb_bias=8.0, otherlogic_bias=2.0, fitted=True)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    configs: tuple[DesignConfiguration, ...] = field(
        default_factory=lambda: builtin_configurations(include_special=False)
    )
    workloads: tuple[WorkloadProfile, ...] = field(default_factory=default_workload_profiles)
    noise_rel: float = 0.05
    component_laws: Mapping[ComponentId, ComponentLaw] = field(default_factory=default_component_laws)
    area_laws: Mapping[ComponentId, ComponentLaw] = field(default_factory=default_area_laws)
    resource_params: ResourceParams = field(default_factory=true_resource_params)
    tech: TechnologyNode = field(default_factory=lambda: TechnologyNode("40nm", 40.0, 1.1))
    frequency_hz: float = 1.0e9

    def __post_init__(self) -> None:
        object.__setattr__(self, "configs", tuple(self.configs))
        object.__setattr__(self, "workloads", tuple(self.workloads))
        object.__setattr__(self, "component_laws", dict(self.component_laws))
        object.__setattr__(self, "area_laws", dict(self.area_laws))
        if not self.configs:
            raise SynthError("spec needs at least one configuration")
        ids = [c.id for c in self.configs]
        if len(set(ids)) != len(ids):
            raise SynthError("configuration ids must be distinct")
        if not self.workloads:
            raise SynthError("spec needs at least one workload profile")
        names = [w.name for w in self.workloads]
        if len(set(names)) != len(names):
            raise SynthError("workload names must be distinct")
        if not (0.0 <= self.noise_rel < 1.0):
            raise SynthError(f"noise_rel must be in [0, 1), got {self.noise_rel!r}")
        for laws, what in ((self.component_laws, "component"), (self.area_laws, "area")):
            missing = [c for c in ComponentId if c not in laws]
            if missing:
                raise SynthError(f"{what} law missing for {missing[0].value}")
        if not self.resource_params.fitted:
            raise SynthError("generator resource parameters must be marked fitted")


def default_synth_spec(
    seed: int = 0, *, include_special: bool = False, noise_rel: float = 0.05
) -> SynthSpec:
    return SynthSpec(
        seed=seed,
        configs=builtin_configurations(include_special=include_special),
        noise_rel=noise_rel,
    )


def exact_affine_spec(seed: int = 0, *, include_special: bool = False) -> SynthSpec:
    """Noise-free spec whose component laws are exactly affine in the
    resource amounts: no activity modulation, unit exponents. Under it the
    per-component power is a deterministic affine function of F, so linear
    fits recover the laws exactly."""
    laws = {
        comp: ComponentLaw(law.base, law.resource_coef, 0.0, nonlinearity=1.0)
        for comp, law in default_component_laws().items()
    }
    return SynthSpec(
        seed=seed,
        configs=builtin_configurations(include_special=include_special),
        noise_rel=0.0,
        component_laws=laws,
    )


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _sample_rng(seed: int, config_id: str, workload: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(
            [seed & _MASK63, _stream_key(f"cfg:{config_id}"), _stream_key(f"wl:{workload}")]
        )
    )


def _area_rng(seed: int, config_id: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed & _MASK63, _stream_key(f"area:{config_id}")])
    )


def _expected_rate(profile: WorkloadProfile, event: str, size: float) -> float:
    base = profile.rates[event]
    amp = profile.amps[event]
    return max(0.0, base * (1.0 + amp * (size - 0.6)))


def oracle_true_cycles(spec: SynthSpec, config: DesignConfiguration, workload: str) -> int:
    """Noiseless measured-cycle count for one (config, workload) pair."""
    profile = _profile_by_name(spec, workload)
    size = config_size_score(config)
    ipc = 0.3 + 0.6 * size
    cycles = profile.base_cycles * (1.0 + profile.size_sensitivity * (1.0 - size)) / ipc
    return max(1, int(round(cycles)))


def _baseline_ratio(config: DesignConfiguration) -> float:
    frac = (config.DecodeWidth - 1) / 4.0
    return 1.1 + 0.3 * min(1.0, max(0.0, frac))


def _profile_by_name(spec: SynthSpec, workload: str) -> WorkloadProfile:
    for profile in spec.workloads:
        if profile.name == workload:
            return profile
    raise SynthError(f"spec has no workload named {workload!r}")


def _component_activity(rates: Mapping[str, float], comp: ComponentId) -> float:
    total = 0.0
    count = 0
    for event in COMPONENT_EVENTS[comp]:
        if event == "numCycles":
            continue
        total += rates[event]
        count += 1
    return total / count if count else 0.0


def oracle_component_power(
    spec: SynthSpec, config: DesignConfiguration, workload: str
) -> dict[ComponentId, float]:
    """Noiseless component power for one (config, workload) pair."""
    profile = _profile_by_name(spec, workload)
    size = config_size_score(config)
    rates = {
        event: _expected_rate(profile, event, size)
        for event in EVENT_REGISTRY
        if event != "numCycles"
    }
    out = {}
    for comp in ComponentId:
        law = spec.component_laws[comp]
        amount = eval_resource(comp, config, spec.resource_params)
        activity = _component_activity(rates, comp)
        out[comp] = law.base + law.resource_coef * amount**law.nonlinearity * (
            1.0 + law.activity_coef * activity
        )
    return out


def oracle_true_power(spec: SynthSpec, config: DesignConfiguration) -> float:
    """Noiseless total power averaged over the spec's workloads."""
    total = 0.0
    for profile in spec.workloads:
        parts = oracle_component_power(spec, config, profile.name)
        for comp in ComponentId:
            total += parts[comp]
    return total / len(spec.workloads)


def _generate_sample(
    spec: SynthSpec, config: DesignConfiguration, profile: WorkloadProfile
) -> tuple[EventVector, dict[ComponentId, float], int]:
    rng = _sample_rng(spec.seed, config.id, profile.name)
    size = config_size_score(config)
    noise = spec.noise_rel

    # Fixed draw order: event jitters, baseline-ratio jitter, component noise.
    event_names = [e for e in EVENT_REGISTRY if e != "numCycles"]
    event_jitter = rng.uniform(-1.0, 1.0, size=len(event_names))
    ratio_jitter = float(rng.uniform(-1.0, 1.0))
    component_noise = rng.uniform(-1.0, 1.0, size=len(ComponentId))

    true_cycles = oracle_true_cycles(spec, config, profile.name)
    ratio = _baseline_ratio(config) * (1.0 + 0.5 * noise * ratio_jitter)
    baseline_cycles = max(1, int(round(true_cycles / ratio)))

    rates = {}
    counts = {"numCycles": baseline_cycles}
    for j, event in enumerate(event_names):
        rate = _expected_rate(profile, event, size) * (1.0 + noise * float(event_jitter[j]))
        rate = max(0.0, rate)
        rates[event] = rate
        counts[event] = int(round(rate * baseline_cycles))

    component_power = {}
    for k, comp in enumerate(ComponentId):
        law = spec.component_laws[comp]
        amount = eval_resource(comp, config, spec.resource_params)
        activity = _component_activity(rates, comp)
        power = law.base + law.resource_coef * amount**law.nonlinearity * (
            1.0 + law.activity_coef * activity
        ) * (1.0 + noise * float(component_noise[k]))
        component_power[comp] = float(max(0.0, power))

    events = EventVector(
        workload=profile.name,
        counts=counts,
        baseline_cycles=baseline_cycles,
        frequency_hz=spec.frequency_hz,
    )
    return events, component_power, true_cycles


def _generate_areas(spec: SynthSpec, config: DesignConfiguration) -> dict[ComponentId, float]:
    rng = _area_rng(spec.seed, config.id)
    jitter = rng.uniform(-1.0, 1.0, size=len(ComponentId))
    out = {}
    for k, comp in enumerate(ComponentId):
        law = spec.area_laws[comp]
        amount = eval_resource(comp, config, spec.resource_params)
        area = (law.base + law.resource_coef * amount**law.nonlinearity) * (
            1.0 + 0.5 * spec.noise_rel * float(jitter[k])
        )
        out[comp] = max(0.0, area)
    return out


def generate(spec: SynthSpec) -> Dataset:
    """Generate the full labeled dataset for the spec.

    Samples are ordered configuration-major, workload-minor, but each
    sample's content depends only on (seed, config, workload), never on
    position.
    """
    samples = []
    for config in spec.configs:
        areas = _generate_areas(spec, config)
        for profile in spec.workloads:
            events, component_power, true_cycles = _generate_sample(spec, config, profile)
            total = 0.0
            for comp in ComponentId:
                total += component_power[comp]
            samples.append(
                Sample(
                    config=config,
                    tech=spec.tech,
                    events=events,
                    total_power_w=total,
                    component_power_w=component_power,
                    true_cycles=true_cycles,
                    component_area_um2=areas,
                )
            )
    return Dataset(samples=tuple(samples))


def oracle_events_provider(spec: SynthSpec) -> Callable[[DesignConfiguration], list[EventVector]]:
    """Events for arbitrary candidate configurations, standing in for a
    performance simulator during design-space exploration."""

    def provider(config: DesignConfiguration) -> list[EventVector]:
        out = []
        for profile in spec.workloads:
            events, _, _ = _generate_sample(spec, config, profile)
            out.append(events)
        return out

    return provider


# ---------------------------------------------------------------------------
# Multi-technology corpus
# ---------------------------------------------------------------------------


def default_technology_nodes() -> tuple[TechnologyNode, ...]:
    return (
        TechnologyNode("28nm", 28.0, 0.8),
        TechnologyNode("40nm", 40.0, 1.1),
        TechnologyNode("65nm", 65.0, 1.2),
    )

# True cross-node scaling deviates from the linear-size model: effective
# power goes as size^(1+_SIZE_EXCESS), so plain first-order scaling is
# systematically wrong by a learnable factor.
_SIZE_EXCESS = 0.45


def node_power(spec: SynthSpec, design_id: str, node: TechnologyNode) -> float:
    """Measured power of a small design at a node (with measurement noise)."""
    scale = 0.003 * (0.3 / 0.003) ** _unit_hash(f"design:{design_id}")
    rng = np.random.default_rng(
        np.random.SeedSequence(
            [spec.seed & _MASK63, _stream_key(f"xfer:{design_id}:{node.name}")]
        )
    )
    jitter = float(rng.uniform(-1.0, 1.0))
    power = (
        scale
        * (node.feature_size_nm / 40.0) ** (1.0 + _SIZE_EXCESS)
        * (node.voltage_v / 1.1) ** 2
        * (1.0 + spec.noise_rel * jitter)
    )
    return power


def generate_multitech(
    spec: SynthSpec,
    nodes: Sequence[TechnologyNode] | None = None,
    n_designs: int = 20,
) -> tuple[TransferSample, ...]:
    """Measured power for small designs across nodes, one transfer sample
    per (design, ordered node pair)."""
    if nodes is None:
        nodes = default_technology_nodes()
    nodes = tuple(nodes)
    if len(nodes) < 2:
        raise SynthError("need at least two technology nodes")
    if n_designs < 1:
        raise SynthError("n_designs must be >= 1")
    samples = []
    for i in range(n_designs):
        design_id = f"d{i:02d}"
        powers = {node.name: node_power(spec, design_id, node) for node in nodes}
        for source in nodes:
            for target in nodes:
                if source.name == target.name:
                    continue
                samples.append(
                    TransferSample(
                        design_id=design_id,
                        source=source,
                        target=target,
                        source_power_w=powers[source.name],
                        target_power_w=powers[target.name],
                    )
                )
    return tuple(samples)
