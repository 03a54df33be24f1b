"""Dataset types and file format.

A dataset is a list of samples, one per (design configuration, workload)
pair. Each sample carries the configuration knobs, the technology node, the
event counters from a performance simulation of that pair, and the measured
labels (total power, optional per-component power, cycle counts, and
per-component area).

On disk a dataset is JSON lines: an optional header line carrying the schema
version followed by one sample object per line. Loading is strict; unknown
keys anywhere in a record are rejected so silently misspelled fields cannot
slip through.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .components import (
    CONFIG_PARAM_ALIASES,
    CONFIG_PARAM_NAMES,
    EVENT_NAME_ALIASES,
    EVENT_REGISTRY,
    ComponentId,
)

SCHEMA_VERSION = "panda-ds-1"
DEFAULT_FREQUENCY_HZ = 1.0e9

# Tolerance for the per-component power sum matching the total label.
_SUM_REL_TOL = 1e-6


class DatasetError(ValueError):
    """Base class for dataset construction and parse failures."""


class DatasetParseError(DatasetError):
    """Malformed dataset file: bad JSON, unknown keys, missing fields."""


class InvariantViolationError(DatasetError):
    """Structurally valid data that breaks a dataset invariant."""


@dataclass(frozen=True)
class DesignConfiguration:
    """One point in the design space: the 17 microarchitecture knobs."""

    id: str
    FetchWidth: int
    DecodeWidth: int
    FetchBufferEntry: int
    RobEntry: int
    IntPhyRegister: int
    FpPhyRegister: int
    LDQEntry: int
    STQEntry: int
    BranchCount: int
    MemIssueWidth: int
    FpIssueWidth: int
    IntIssueWidth: int
    DCacheWay: int
    ICacheWay: int
    DTLBEntry: int
    DCacheMSHR: int
    ICacheFetchBytes: int

    def __post_init__(self) -> None:
        if not self.id:
            raise InvariantViolationError("configuration id must be non-empty")
        for name in CONFIG_PARAM_NAMES:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise InvariantViolationError(
                    f"config {self.id!r}: parameter {name} must be a positive integer, got {value!r}"
                )
        if self.DecodeWidth > self.FetchWidth:
            raise InvariantViolationError(
                f"config {self.id!r}: DecodeWidth {self.DecodeWidth} exceeds FetchWidth {self.FetchWidth}"
            )

    def param(self, name: str) -> int:
        """Look up a knob by canonical name or accepted alias."""
        name = CONFIG_PARAM_ALIASES.get(name, name)
        if name not in CONFIG_PARAM_NAMES:
            raise KeyError(f"unknown configuration parameter {name!r}")
        return getattr(self, name)

    def params(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in CONFIG_PARAM_NAMES}


@dataclass(frozen=True)
class TechnologyNode:
    """Fabrication process corner: feature size and supply voltage."""

    name: str
    feature_size_nm: float
    voltage_v: float

    def __post_init__(self) -> None:
        if not (self.feature_size_nm > 0.0 and self.voltage_v > 0.0):
            raise InvariantViolationError(
                f"technology node {self.name!r}: feature size and voltage must be positive"
            )


@dataclass(frozen=True)
class EventVector:
    """Event counters from one simulated run of a workload on a design.

    ``baseline_cycles`` is the simulator's own cycle count for the run and
    always equals ``counts["numCycles"]``; it is the denominator used when
    counters are converted to per-cycle rates and the anchor the cycle
    calibrator corrects.
    """

    workload: str
    counts: Mapping[str, int]
    baseline_cycles: int
    frequency_hz: float = DEFAULT_FREQUENCY_HZ

    def __post_init__(self) -> None:
        if not self.workload:
            raise InvariantViolationError("workload name must be non-empty")
        object.__setattr__(self, "counts", dict(self.counts))
        for name, value in self.counts.items():
            if name not in _REGISTRY_SET:
                raise InvariantViolationError(f"unknown event counter {name!r}")
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise InvariantViolationError(
                    f"event counter {name!r} must be a non-negative integer, got {value!r}"
                )
        if "numCycles" not in self.counts:
            raise InvariantViolationError("event counters must include numCycles")
        if self.baseline_cycles < 1:
            raise InvariantViolationError("baseline_cycles must be >= 1")
        if self.counts["numCycles"] != self.baseline_cycles:
            raise InvariantViolationError(
                f"numCycles {self.counts['numCycles']} != baseline_cycles {self.baseline_cycles}"
            )
        if not self.frequency_hz > 0.0:
            raise InvariantViolationError("frequency_hz must be positive")


_REGISTRY_SET = frozenset(EVENT_REGISTRY)


@dataclass(frozen=True)
class Sample:
    """One labeled (configuration, workload) measurement."""

    config: DesignConfiguration
    tech: TechnologyNode
    events: EventVector
    total_power_w: float
    component_power_w: Mapping[ComponentId, float] | None = None
    true_cycles: int | None = None
    component_area_um2: Mapping[ComponentId, float] | None = None

    def __post_init__(self) -> None:
        if not (self.total_power_w >= 0.0):
            raise InvariantViolationError(
                f"sample {self.config.id}/{self.events.workload}: total power must be >= 0"
            )
        for label, mapping in (
            ("component_power_w", self.component_power_w),
            ("component_area_um2", self.component_area_um2),
        ):
            if mapping is None:
                continue
            mapping = dict(mapping)
            object.__setattr__(self, label, mapping)
            missing = [c for c in ComponentId if c not in mapping]
            if missing:
                raise InvariantViolationError(
                    f"sample {self.config.id}/{self.events.workload}: {label} missing {missing[0].value}"
                )
            extra = [k for k in mapping if not isinstance(k, ComponentId)]
            if extra:
                raise InvariantViolationError(
                    f"sample {self.config.id}/{self.events.workload}: {label} has unknown key {extra[0]!r}"
                )
            for comp, value in mapping.items():
                if not (value >= 0.0):
                    raise InvariantViolationError(
                        f"sample {self.config.id}/{self.events.workload}: {label}[{comp.value}] must be >= 0"
                    )
        if self.component_power_w is not None:
            total = sum(self.component_power_w[c] for c in ComponentId)
            tol = _SUM_REL_TOL * max(abs(self.total_power_w), 1e-30)
            if abs(total - self.total_power_w) > tol:
                raise InvariantViolationError(
                    f"sample {self.config.id}/{self.events.workload}: component power sum "
                    f"{total!r} does not match total {self.total_power_w!r}"
                )
        if self.true_cycles is not None and self.true_cycles < 1:
            raise InvariantViolationError(
                f"sample {self.config.id}/{self.events.workload}: true_cycles must be >= 1"
            )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of samples sharing one event registry."""

    samples: tuple[Sample, ...]
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        by_id: dict[str, DesignConfiguration] = {}
        for i, sample in enumerate(self.samples):
            prev = by_id.setdefault(sample.config.id, sample.config)
            if prev != sample.config:
                raise InvariantViolationError(
                    f"sample {i}: config id {sample.config.id!r} reused with different parameter values"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def config_ids(self) -> tuple[str, ...]:
        """Distinct configuration ids in first-appearance order."""
        seen: dict[str, None] = {}
        for s in self.samples:
            seen.setdefault(s.config.id, None)
        return tuple(seen)

    def configs(self) -> tuple[DesignConfiguration, ...]:
        by_id: dict[str, DesignConfiguration] = {}
        for s in self.samples:
            by_id.setdefault(s.config.id, s.config)
        return tuple(by_id.values())

    def workloads(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for s in self.samples:
            seen.setdefault(s.events.workload, None)
        return tuple(seen)

    def subset(self, config_ids: Iterable[str]) -> "Dataset":
        wanted = set(config_ids)
        return Dataset(
            samples=tuple(s for s in self.samples if s.config.id in wanted),
            schema_version=self.schema_version,
        )


# ---------------------------------------------------------------------------
# Built-in configurations
# ---------------------------------------------------------------------------

# 15 regular design points spanning decode widths 1 through 5, plus two
# deliberately unbalanced designs (SP1: wide fetch on an otherwise minimal
# core; SP2: a maximal core with minimal caches) used as stress tests.
_BUILTIN_IDS = tuple(f"C{i}" for i in range(1, 16)) + ("SP1", "SP2")

_BUILTIN_TABLE: dict[str, tuple[int, ...]] = {
    "FetchWidth":       (4, 4, 4, 4, 4, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8),
    "DecodeWidth":      (1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 5, 5, 5, 1, 5),
    "FetchBufferEntry": (5, 8, 16, 8, 16, 24, 18, 24, 30, 24, 32, 40, 30, 35, 40, 10, 40),
    "RobEntry":         (16, 32, 48, 64, 64, 80, 81, 96, 114, 112, 128, 136, 125, 130, 140, 16, 140),
    "IntPhyRegister":   (36, 53, 68, 64, 80, 88, 88, 110, 112, 108, 128, 136, 108, 128, 140, 36, 140),
    "FpPhyRegister":    (36, 48, 56, 56, 64, 72, 88, 96, 112, 108, 128, 136, 108, 128, 140, 36, 140),
    "LDQEntry":         (4, 8, 16, 12, 16, 20, 16, 24, 32, 24, 32, 36, 24, 32, 36, 4, 36),
    "STQEntry":         (4, 8, 16, 12, 16, 20, 16, 24, 32, 24, 32, 36, 24, 32, 36, 4, 36),
    "BranchCount":      (6, 8, 10, 10, 12, 14, 14, 16, 16, 18, 20, 20, 18, 20, 20, 6, 20),
    "MemIssueWidth":    (1, 1, 1, 1, 1, 1, 1, 1, 2, 1, 2, 2, 2, 2, 2, 1, 2),
    "FpIssueWidth":     (1, 1, 1, 1, 1, 1, 1, 1, 2, 1, 2, 2, 2, 2, 2, 1, 2),
    "IntIssueWidth":    (1, 1, 1, 1, 2, 2, 2, 3, 3, 4, 4, 4, 5, 5, 5, 1, 5),
    "DCacheWay":        (2, 4, 8, 4, 4, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 2, 2),
    "ICacheWay":        (2, 4, 8, 4, 4, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 2, 2),
    "DTLBEntry":        (8, 8, 16, 8, 8, 16, 16, 16, 32, 32, 32, 32, 32, 32, 32, 8, 32),
    "DCacheMSHR":       (2, 2, 4, 2, 2, 4, 4, 4, 4, 4, 4, 8, 8, 8, 8, 2, 8),
    "ICacheFetchBytes": (2, 2, 2, 2, 2, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4),
}


def builtin_configurations(include_special: bool = True) -> tuple[DesignConfiguration, ...]:
    """The 15 standard design points C1..C15, plus SP1/SP2 when requested."""
    count = 17 if include_special else 15
    out = []
    for i in range(count):
        values = {name: _BUILTIN_TABLE[name][i] for name in CONFIG_PARAM_NAMES}
        out.append(DesignConfiguration(id=_BUILTIN_IDS[i], **values))
    return tuple(out)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_SAMPLE_KEYS = {"config", "tech", "workload", "events", "baseline_cycles", "frequency_hz", "labels"}
_LABEL_KEYS = {"total_power_w", "component_power_w", "cycles", "component_area_um2"}
_TECH_KEYS = {"name", "feature_size_nm", "voltage_v"}


def sample_to_record(sample: Sample) -> dict:
    """Encode a sample as its JSON-line object."""
    record: dict = {
        "config": {"id": sample.config.id, **sample.config.params()},
        "tech": {
            "name": sample.tech.name,
            "feature_size_nm": sample.tech.feature_size_nm,
            "voltage_v": sample.tech.voltage_v,
        },
        "workload": sample.events.workload,
        "events": {k: sample.events.counts[k] for k in EVENT_REGISTRY if k in sample.events.counts},
        "baseline_cycles": sample.events.baseline_cycles,
    }
    if sample.events.frequency_hz != DEFAULT_FREQUENCY_HZ:
        record["frequency_hz"] = sample.events.frequency_hz
    labels: dict = {"total_power_w": sample.total_power_w}
    if sample.component_power_w is not None:
        labels["component_power_w"] = {c.value: sample.component_power_w[c] for c in ComponentId}
    if sample.true_cycles is not None:
        labels["cycles"] = sample.true_cycles
    if sample.component_area_um2 is not None:
        labels["component_area_um2"] = {c.value: sample.component_area_um2[c] for c in ComponentId}
    record["labels"] = labels
    return record


def _reject_unknown(obj: Mapping, allowed: set[str], where: str) -> None:
    unknown = [k for k in obj if k not in allowed]
    if unknown:
        raise DatasetParseError(f"{where}: unknown key {unknown[0]!r}")


def _component_map(obj: Mapping, where: str) -> dict[ComponentId, float]:
    values = {}
    for key, value in obj.items():
        try:
            comp = ComponentId(key)
        except ValueError:
            raise DatasetParseError(f"{where}: unknown component {key!r}") from None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise DatasetParseError(f"{where}: value for {key} must be a number")
        values[comp] = float(value)
    return values


def sample_from_record(record: Mapping, where: str = "sample") -> Sample:
    """Decode and validate one JSON-line object."""
    if not isinstance(record, Mapping):
        raise DatasetParseError(f"{where}: record must be an object")
    _reject_unknown(record, _SAMPLE_KEYS, where)
    for key in ("config", "tech", "workload", "events", "baseline_cycles", "labels"):
        if key not in record:
            raise DatasetParseError(f"{where}: missing required key {key!r}")

    cfg_obj = dict(record["config"])
    cfg_id = cfg_obj.pop("id", None)
    if not isinstance(cfg_id, str):
        raise DatasetParseError(f"{where}: config.id must be a string")
    params: dict[str, int] = {}
    for key, value in cfg_obj.items():
        canon = CONFIG_PARAM_ALIASES.get(key, key)
        if canon not in CONFIG_PARAM_NAMES:
            raise DatasetParseError(f"{where}: unknown config parameter {key!r}")
        if canon in params and params[canon] != value:
            raise DatasetParseError(f"{where}: conflicting values for config parameter {canon}")
        if not isinstance(value, int) or isinstance(value, bool):
            raise DatasetParseError(f"{where}: config parameter {key} must be an integer")
        params[canon] = value
    missing = [p for p in CONFIG_PARAM_NAMES if p not in params]
    if missing:
        raise DatasetParseError(f"{where}: missing config parameter {missing[0]!r}")

    tech_obj = record["tech"]
    if not isinstance(tech_obj, Mapping):
        raise DatasetParseError(f"{where}: tech must be an object")
    _reject_unknown(tech_obj, _TECH_KEYS, f"{where}.tech")
    for key in _TECH_KEYS:
        if key not in tech_obj:
            raise DatasetParseError(f"{where}: tech missing key {key!r}")

    events_obj = record["events"]
    if not isinstance(events_obj, Mapping):
        raise DatasetParseError(f"{where}: events must be an object")
    counts: dict[str, int] = {}
    for key, value in events_obj.items():
        canon = EVENT_NAME_ALIASES.get(key, key)
        if canon not in _REGISTRY_SET:
            raise DatasetParseError(f"{where}: unknown event counter {key!r}")
        if not isinstance(value, int) or isinstance(value, bool):
            raise DatasetParseError(f"{where}: event counter {key} must be an integer")
        counts[canon] = value

    labels_obj = record["labels"]
    if not isinstance(labels_obj, Mapping):
        raise DatasetParseError(f"{where}: labels must be an object")
    _reject_unknown(labels_obj, _LABEL_KEYS, f"{where}.labels")
    if "total_power_w" not in labels_obj:
        raise DatasetParseError(f"{where}: labels missing total_power_w")

    component_power = None
    if "component_power_w" in labels_obj:
        component_power = _component_map(labels_obj["component_power_w"], f"{where}.labels.component_power_w")
    component_area = None
    if "component_area_um2" in labels_obj:
        component_area = _component_map(labels_obj["component_area_um2"], f"{where}.labels.component_area_um2")

    frequency = record.get("frequency_hz", DEFAULT_FREQUENCY_HZ)
    if not isinstance(frequency, (int, float)) or isinstance(frequency, bool):
        raise DatasetParseError(f"{where}: frequency_hz must be a number")

    try:
        config = DesignConfiguration(id=cfg_id, **params)
        tech = TechnologyNode(
            name=str(tech_obj["name"]),
            feature_size_nm=float(tech_obj["feature_size_nm"]),
            voltage_v=float(tech_obj["voltage_v"]),
        )
        events = EventVector(
            workload=record["workload"],
            counts=counts,
            baseline_cycles=record["baseline_cycles"],
            frequency_hz=float(frequency),
        )
        return Sample(
            config=config,
            tech=tech,
            events=events,
            total_power_w=float(labels_obj["total_power_w"]),
            component_power_w=component_power,
            true_cycles=labels_obj.get("cycles"),
            component_area_um2=component_area,
        )
    except InvariantViolationError as exc:
        raise InvariantViolationError(f"{where}: {exc}") from None


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset as JSON lines with a leading schema-version header."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema_version": dataset.schema_version}, separators=(",", ":")))
        fh.write("\n")
        for sample in dataset.samples:
            fh.write(json.dumps(sample_to_record(sample), separators=(",", ":")))
            fh.write("\n")


def load_dataset(path: str | Path) -> Dataset:
    """Read a JSON-lines dataset, validating every record."""
    path = Path(path)
    samples: list[Sample] = []
    version = SCHEMA_VERSION
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"{path.name}:{lineno}: invalid JSON ({exc.msg})") from None
            if lineno == 1 and isinstance(record, dict) and set(record) == {"schema_version"}:
                version = record["schema_version"]
                if version != SCHEMA_VERSION:
                    raise DatasetParseError(
                        f"{path.name}: unsupported schema version {version!r}, expected {SCHEMA_VERSION!r}"
                    )
                continue
            samples.append(sample_from_record(record, where=f"{path.name}:{lineno}"))
    return Dataset(samples=tuple(samples), schema_version=version)


# ---------------------------------------------------------------------------
# Split plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitFold:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if set(self.train_ids) & set(self.test_ids):
            raise InvariantViolationError("fold train and test ids overlap")


@dataclass(frozen=True)
class SplitPlan:
    name: str
    folds: tuple[SplitFold, ...]


def split_known_n(config_ids: Sequence[str], n: int) -> SplitPlan:
    """Rotating known-configuration protocol over 15 ordered designs.

    Fold k trains on the n designs in the cyclically contiguous window
    ending just before position k and tests on the remaining 15 - n designs
    starting at position k. Every design is tested in 15 - n folds;
    downstream evaluation averages its predictions across those folds.
    """
    ids = list(config_ids)
    if len(ids) != 15:
        raise ValueError(f"known-n protocol requires exactly 15 config ids, got {len(ids)}")
    if len(set(ids)) != 15:
        raise ValueError("known-n protocol requires distinct config ids")
    if not 1 <= n <= 14:
        raise ValueError(f"n must be in [1, 14], got {n}")
    test_size = 15 - n
    folds = []
    for k in range(15):
        test = tuple(ids[(k + j) % 15] for j in range(test_size))
        train = tuple(ids[(k + test_size + j) % 15] for j in range(n))
        folds.append(SplitFold(train_ids=train, test_ids=test))
    return SplitPlan(name=f"known-{n}", folds=tuple(folds))


def split_unknown_domain(configs: Sequence[DesignConfiguration]) -> SplitPlan:
    """Leave-one-decode-width-out protocol.

    Designs are grouped by DecodeWidth; each fold holds one group out for
    testing and trains on all others. Folds are ordered by ascending width.
    """
    groups: dict[int, list[str]] = {}
    for cfg in configs:
        groups.setdefault(cfg.DecodeWidth, []).append(cfg.id)
    if len(groups) < 2:
        raise ValueError("unknown-domain protocol requires at least 2 distinct DecodeWidth values")
    all_ids = [cfg.id for cfg in configs]
    folds = []
    for width in sorted(groups):
        test = tuple(groups[width])
        train = tuple(i for i in all_ids if i not in set(test))
        folds.append(SplitFold(train_ids=train, test_ids=test))
    return SplitPlan(name="unknown-domain", folds=tuple(folds))
