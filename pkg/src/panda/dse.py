"""Design-space exploration under a power constraint.

A design space is one value grid per configuration knob plus comparison
rules between knobs (or against constants). Candidates are the grid
product filtered by the rules, enumerated in a fixed lexicographic order
so candidate ids are stable across runs.

Each candidate is scored with trained models only: the cycle calibrator
turns per-workload activity into predicted cycle counts, performance is
the mean speedup over a reference design (the reference scores exactly
1.0 against itself), and predicted power is averaged over workloads. A
candidate is feasible when its predicted power stays within the
constraint times ``1 + tolerance``. Feasible candidates are ranked by
performance, ties broken by lower power, then id.

Activity for unseen candidates comes from an events provider callable.
``dataset_events_provider`` builds one from measured data by averaging
per-workload rates across designs; the synthetic generator's provider
stands in for a performance simulator in tests.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import Dataset, DesignConfiguration, EventVector, builtin_configurations
from .components import CONFIG_PARAM_NAMES, resolve_param_name
from .power_model import PandaPowerModel, build_features, predict_total_power_batch
from .quality import PerfCalibrator
from .regressor import TrainOptions, fit, predict_matrix

SPACE_FORMAT_TAG = "panda-space-1"

RULE_OPS = ("<=", "<", ">=", ">", "==")

EventsProvider = Callable[[DesignConfiguration], Sequence[EventVector]]


class DseError(ValueError):
    pass


@dataclass(frozen=True)
class DesignRule:
    """Comparison constraint between one knob and another knob or a
    constant, e.g. ("IntIssueWidth", "<=", "DecodeWidth")."""

    lhs: str
    op: str
    rhs: str | int

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "lhs", resolve_param_name(self.lhs))
        except KeyError as exc:
            raise DseError(str(exc.args[0])) from None
        if self.op not in RULE_OPS:
            raise DseError(f"rule operator must be one of {RULE_OPS}, got {self.op!r}")
        if isinstance(self.rhs, bool):
            raise DseError("rule right-hand side must be a knob name or integer")
        if isinstance(self.rhs, str):
            try:
                object.__setattr__(self, "rhs", resolve_param_name(self.rhs))
            except KeyError as exc:
                raise DseError(str(exc.args[0])) from None
        elif not isinstance(self.rhs, int):
            raise DseError("rule right-hand side must be a knob name or integer")

    def holds(self, values: Mapping[str, int]) -> bool:
        left = values[self.lhs]
        right = self.rhs if isinstance(self.rhs, int) else values[self.rhs]
        if self.op == "<=":
            return left <= right
        if self.op == "<":
            return left < right
        if self.op == ">=":
            return left >= right
        if self.op == ">":
            return left > right
        return left == right


@dataclass(frozen=True)
class DesignSpace:
    """Value grid per knob (all 17 required) plus rules."""

    grids: Mapping[str, tuple[int, ...]]
    rules: tuple[DesignRule, ...] = ()

    def __post_init__(self) -> None:
        grids = {}
        for name, values in self.grids.items():
            try:
                canonical = resolve_param_name(name)
            except KeyError as exc:
                raise DseError(str(exc.args[0])) from None
            if canonical in grids:
                raise DseError(f"duplicate grid for {canonical}")
            vals = tuple(sorted(set(int(v) for v in values)))
            if not vals:
                raise DseError(f"empty grid for {canonical}")
            if any(v < 1 for v in vals):
                raise DseError(f"grid values for {canonical} must be >= 1")
            grids[canonical] = vals
        missing = [n for n in CONFIG_PARAM_NAMES if n not in grids]
        if missing:
            raise DseError(f"design space lacks a grid for {missing[0]}")
        object.__setattr__(self, "grids", grids)
        object.__setattr__(self, "rules", tuple(self.rules))

    def grid_size(self) -> int:
        size = 1
        for name in CONFIG_PARAM_NAMES:
            size *= len(self.grids[name])
        return size


def space_from_configs(configs: Sequence[DesignConfiguration]) -> DesignSpace:
    """Smallest grid covering the given designs (no rules)."""
    if not configs:
        raise DseError("need at least one configuration")
    grids = {name: {c.param(name) for c in configs} for name in CONFIG_PARAM_NAMES}
    return DesignSpace(grids={n: tuple(sorted(v)) for n, v in grids.items()})


def enumerate_candidates(
    space: DesignSpace, max_candidates: int = 20_000
) -> tuple[DesignConfiguration, ...]:
    """Rule-passing grid points in lexicographic knob order.

    Candidates violating the structural requirement DecodeWidth <=
    FetchWidth are skipped whether or not a rule says so, since no such
    design can exist. Ids number accepted candidates in order.
    """
    if space.grid_size() > 10_000_000:
        raise DseError(f"grid of {space.grid_size()} points is too large to enumerate")
    out = []
    axes = [space.grids[name] for name in CONFIG_PARAM_NAMES]
    for combo in itertools.product(*axes):
        values = dict(zip(CONFIG_PARAM_NAMES, combo))
        if values["DecodeWidth"] > values["FetchWidth"]:
            continue
        if not all(rule.holds(values) for rule in space.rules):
            continue
        out.append(
            DesignConfiguration(id=f"x{len(out) + 1:05d}", **values)
        )
        if len(out) > max_candidates:
            raise DseError(
                f"design space yields more than max_candidates={max_candidates} candidates"
            )
    if not out:
        raise DseError("design space admits no candidates")
    return tuple(out)


# ---------------------------------------------------------------------------
# Space file IO
# ---------------------------------------------------------------------------


def save_design_space(space: DesignSpace, path: str | Path) -> None:
    obj = {
        "format": SPACE_FORMAT_TAG,
        "params": {name: list(space.grids[name]) for name in CONFIG_PARAM_NAMES},
        "rules": [[r.lhs, r.op, r.rhs] for r in space.rules],
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_design_space(path: str | Path) -> DesignSpace:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DseError(f"{path.name}: corrupt design space file ({exc.msg})") from None
    if not isinstance(obj, dict) or obj.get("format") != SPACE_FORMAT_TAG:
        raise DseError(
            f"{path.name}: unsupported design space format "
            f"{obj.get('format') if isinstance(obj, dict) else None!r}"
        )
    params = obj.get("params")
    if not isinstance(params, dict):
        raise DseError(f"{path.name}: missing params object")
    rules_obj = obj.get("rules", [])
    if not isinstance(rules_obj, list):
        raise DseError(f"{path.name}: rules must be a list")
    rules = []
    for entry in rules_obj:
        if not (isinstance(entry, list) and len(entry) == 3):
            raise DseError(f"{path.name}: each rule must be [lhs, op, rhs]")
        rules.append(DesignRule(lhs=entry[0], op=entry[1], rhs=entry[2]))
    return DesignSpace(grids={k: tuple(v) for k, v in params.items()}, rules=tuple(rules))


# ---------------------------------------------------------------------------
# Events providers
# ---------------------------------------------------------------------------


def dataset_events_provider(dataset: Dataset) -> EventsProvider:
    """Approximate activity for unseen designs from measured data.

    Per workload, counter rates are averaged across the dataset's designs.
    Cycle counts do depend on the design, so a small regressor learns each
    design's baseline-cycle scale (cycles over the workload mean) from its
    knobs; a candidate's baseline is the predicted scale times the
    workload mean. Coarse, but it needs nothing beyond the dataset the
    models were trained on.
    """
    rates: dict[str, dict[str, list[float]]] = {}
    cycles: dict[str, list[int]] = {}
    for s in dataset.samples:
        w = s.events.workload
        cycles.setdefault(w, []).append(s.events.baseline_cycles)
        bucket = rates.setdefault(w, {})
        denom = float(s.events.counts["numCycles"])
        for event, count in s.events.counts.items():
            if event == "numCycles":
                continue
            bucket.setdefault(event, []).append(count / denom)

    profiles = []
    mean_cycles = {w: float(np.mean(v)) for w, v in cycles.items()}
    for w in sorted(cycles):
        mean_rates = {e: float(np.mean(v)) for e, v in rates[w].items()}
        profiles.append((w, mean_cycles[w], mean_rates))

    X = np.array(
        [[float(s.config.param(n)) for n in CONFIG_PARAM_NAMES] for s in dataset.samples],
        dtype=np.float64,
    )
    y = np.array(
        [s.events.baseline_cycles / mean_cycles[s.events.workload] for s in dataset.samples],
        dtype=np.float64,
    )
    scale_model = fit(X, y, TrainOptions(), feature_names=CONFIG_PARAM_NAMES)

    def provider(config: DesignConfiguration) -> list[EventVector]:
        row = np.array(
            [[float(config.param(n)) for n in CONFIG_PARAM_NAMES]], dtype=np.float64
        )
        scale = max(1e-6, float(predict_matrix(scale_model, row)[0]))
        out = []
        for workload, workload_mean, mean_rates in profiles:
            baseline = max(1, int(round(scale * workload_mean)))
            counts = {"numCycles": baseline}
            for event, rate in mean_rates.items():
                counts[event] = int(round(rate * baseline))
            out.append(
                EventVector(workload=workload, counts=counts, baseline_cycles=baseline)
            )
        return out

    return provider


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _EvalPoint:
    config: DesignConfiguration
    events: EventVector


@dataclass(frozen=True)
class Candidate:
    id: str
    config: DesignConfiguration
    predicted_power_w: float
    predicted_perf: float
    feasible: bool


@dataclass(frozen=True)
class ExploreResult:
    power_constraint_w: float
    tolerance: float
    reference_id: str
    n_candidates: int
    n_feasible: int
    ranked: tuple[Candidate, ...]

    def top(self, k: int) -> tuple[Candidate, ...]:
        if k < 1:
            raise DseError("k must be >= 1")
        return self.ranked[:k]


def _predict_cycles_batch(
    perf_model: PerfCalibrator, points: Sequence[_EvalPoint]
) -> np.ndarray:
    names = perf_model.ensemble.feature_names
    X = np.empty((len(points), len(names)), dtype=np.float64)
    baselines = np.empty(len(points), dtype=np.float64)
    for i, point in enumerate(points):
        row = build_features(perf_model.spec, point.config, point.events)
        for j, name in enumerate(names):
            X[i, j] = row[name]
        baselines[i] = point.events.baseline_cycles
    ratios = predict_matrix(perf_model.ensemble, X)
    return np.maximum(1.0, ratios * baselines)


def explore(
    power_model: PandaPowerModel,
    perf_model: PerfCalibrator,
    space: DesignSpace,
    events_provider: EventsProvider,
    *,
    power_constraint_w: float,
    tolerance: float = 0.0,
    reference: DesignConfiguration | None = None,
    max_candidates: int = 20_000,
) -> ExploreResult:
    """Enumerate, score, and rank every candidate in the space."""
    if not (power_constraint_w > 0.0):
        raise DseError("power_constraint_w must be positive")
    if not (0.0 <= tolerance < 1.0):
        raise DseError("tolerance must be in [0, 1)")
    if reference is None:
        reference = builtin_configurations(include_special=False)[0]

    candidates = enumerate_candidates(space, max_candidates)

    ref_events = list(events_provider(reference))
    if not ref_events:
        raise DseError("events provider returned no workloads for the reference design")
    workloads = tuple(e.workload for e in ref_events)
    if len(set(workloads)) != len(workloads):
        raise DseError("events provider returned duplicate workloads")

    points: list[_EvalPoint] = [_EvalPoint(reference, e) for e in ref_events]
    for config in candidates:
        evs = list(events_provider(config))
        got = tuple(e.workload for e in evs)
        if got != workloads:
            raise DseError(
                f"events provider workloads for {config.id} differ from the reference"
            )
        points.extend(_EvalPoint(config, e) for e in evs)

    cycles = _predict_cycles_batch(perf_model, points)
    power = predict_total_power_batch(power_model, points)

    n_work = len(workloads)
    ref_cycles = cycles[:n_work]
    limit = power_constraint_w * (1.0 + tolerance)

    scored = []
    n_feasible = 0
    for idx, config in enumerate(candidates):
        lo = n_work * (idx + 1)
        hi = lo + n_work
        perf = float(np.mean(ref_cycles / cycles[lo:hi]))
        mean_power = float(np.mean(power[lo:hi]))
        feasible = mean_power <= limit
        n_feasible += feasible
        scored.append(
            Candidate(
                id=config.id,
                config=config,
                predicted_power_w=mean_power,
                predicted_perf=perf,
                feasible=feasible,
            )
        )

    if n_feasible == 0:
        raise DseError(
            f"no candidate satisfies the {power_constraint_w} W constraint "
            f"(tolerance {tolerance})"
        )

    ranked = sorted(
        (c for c in scored if c.feasible),
        key=lambda c: (-c.predicted_perf, c.predicted_power_w, c.id),
    )
    return ExploreResult(
        power_constraint_w=power_constraint_w,
        tolerance=tolerance,
        reference_id=reference.id,
        n_candidates=len(candidates),
        n_feasible=n_feasible,
        ranked=tuple(ranked),
    )


def write_result_csv(result: ExploreResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rank", "candidate_id", "predicted_perf", "predicted_power_w", *CONFIG_PARAM_NAMES]
        )
        for rank, cand in enumerate(result.ranked, start=1):
            writer.writerow(
                [
                    rank,
                    cand.id,
                    repr(cand.predicted_perf),
                    repr(cand.predicted_power_w),
                    *[cand.config.param(n) for n in CONFIG_PARAM_NAMES],
                ]
            )
