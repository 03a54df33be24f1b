"""Evaluation protocols, metrics, and resource diagnostics.

The two cross-validation protocols operate on the 15-design corpus:

* known designs: 15 cyclic folds over the design list; fold k trains on
  ``n`` designs and tests on the remaining contiguous window, so every
  design is tested in exactly ``15 - n`` folds. Per-sample predictions are
  averaged over the folds that tested the sample's design.
* unknown domain: one fold per decode-width group, training on all other
  groups, so tested designs never share a decode width with training.

Metrics are computed per design over its workloads (relative error and
correlation), then averaged across designs. A model whose predictions do
not vary across a design's workloads has no meaningful correlation there;
such designs report ``r=None`` and are excluded from the correlation
average.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baselines import (
    predict_analytical,
    predict_component_ml_batch,
    predict_global_ml_batch,
    train_analytical,
    train_component_ml,
    train_global_ml,
)
from .components import ComponentId
from .dataset import Dataset, Sample, SplitPlan, split_known_n, split_unknown_domain
from .power_model import predict_total_power_batch, train_panda
from .regressor import TrainOptions
from .resource import ResourceParams, default_resource_params, eval_resource, fit_resource_params

MODEL_KINDS = ("panda", "global-ml", "component-ml", "analytical")

SPECIAL_TEST_IDS = ("SP1", "SP2")


class EvalError(ValueError):
    pass


def mape(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    """Mean absolute relative error; labels must be nonzero."""
    yt = np.asarray(y_true, dtype=np.float64)
    yp = np.asarray(y_pred, dtype=np.float64)
    if yt.shape != yp.shape or yt.ndim != 1 or yt.size == 0:
        raise EvalError("mape needs two equal-length nonempty 1-D arrays")
    if np.any(yt == 0.0):
        raise EvalError("mape is undefined for zero labels")
    return float(np.mean(np.abs(yt - yp) / np.abs(yt)))


def pearson_r(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Pearson correlation; None when either side has zero variance."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise EvalError("pearson_r needs two equal-length arrays of size >= 2")
    xd = x - x.mean()
    yd = y - y.mean()
    denom = float(np.sqrt((xd * xd).sum() * (yd * yd).sum()))
    if denom == 0.0:
        return None
    return float((xd * yd).sum() / denom)


@dataclass(frozen=True)
class ConfigMetrics:
    config_id: str
    n_samples: int
    mape: float
    r: float | None


@dataclass(frozen=True)
class EvalReport:
    kind: str
    protocol: str
    per_config: tuple[ConfigMetrics, ...]
    mean_mape: float
    mean_r: float | None


# ---------------------------------------------------------------------------
# Model dispatch
# ---------------------------------------------------------------------------


def train_model(
    kind: str,
    train: Dataset | Sequence[Sample],
    opts: TrainOptions | None = None,
    defaults: ResourceParams | None = None,
):
    if kind not in MODEL_KINDS:
        raise EvalError(f"unknown model kind {kind!r}, expected one of {MODEL_KINDS}")
    opts = opts if opts is not None else TrainOptions()
    if kind == "panda":
        return train_panda(train, opts, defaults)
    if kind == "global-ml":
        return train_global_ml(train, opts)
    if kind == "component-ml":
        return train_component_ml(train, opts)
    return train_analytical(train, defaults)


def predict_total_batch(kind: str, model, samples: Sequence[Sample]) -> np.ndarray:
    if kind == "panda":
        return predict_total_power_batch(model, samples)
    if kind == "global-ml":
        return predict_global_ml_batch(model, samples)
    if kind == "component-ml":
        return predict_component_ml_batch(model, samples)
    if kind == "analytical":
        return np.array(
            [predict_analytical(model, s.config)[0] for s in samples], dtype=np.float64
        )
    raise EvalError(f"unknown model kind {kind!r}, expected one of {MODEL_KINDS}")


# ---------------------------------------------------------------------------
# Protocols
# ---------------------------------------------------------------------------


def make_split_plan(dataset: Dataset, protocol: str, n_train: int | None = None) -> SplitPlan:
    if protocol == "known-n":
        if n_train is None:
            raise EvalError("known-n protocol requires n_train")
        return split_known_n(dataset.config_ids(), n_train)
    if protocol == "unknown-domain":
        return split_unknown_domain(dataset.configs())
    raise EvalError(f"unknown protocol {protocol!r}")


def _run_fold(
    kind: str,
    train_samples: Sequence[Sample],
    test_samples: Sequence[Sample],
    opts: TrainOptions | None,
    defaults: ResourceParams | None,
) -> list[tuple[str, str, float]]:
    model = train_model(kind, train_samples, opts, defaults)
    preds = predict_total_batch(kind, model, test_samples)
    return [
        (s.config.id, s.events.workload, float(p)) for s, p in zip(test_samples, preds)
    ]


def fold_predictions(
    dataset: Dataset,
    kind: str,
    plan: SplitPlan,
    *,
    opts: TrainOptions | None = None,
    defaults: ResourceParams | None = None,
    jobs: int = 1,
) -> dict[tuple[str, str], list[float]]:
    """Raw per-fold predictions keyed by (config id, workload).

    Each key collects one prediction per fold whose test set contains the
    configuration; ``run_protocol`` averages these. Exposed separately so
    tests can check that a fold's predictions depend only on that fold's
    training labels. ``jobs > 1`` trains folds in worker processes; results
    are merged in fold order either way, so the output never depends on
    scheduling.
    """
    if jobs < 1:
        raise EvalError("jobs must be >= 1")
    by_config: dict[str, list[Sample]] = {}
    for s in dataset.samples:
        by_config.setdefault(s.config.id, []).append(s)

    work = []
    for fold in plan.folds:
        train_samples = [s for cid in fold.train_ids for s in by_config[cid]]
        test_samples = [s for cid in fold.test_ids for s in by_config[cid]]
        work.append((kind, train_samples, test_samples, opts, defaults))

    if jobs == 1 or len(work) == 1:
        fold_rows = [_run_fold(*w) for w in work]
    else:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            fold_rows = list(pool.map(_run_fold, *zip(*work)))

    out: dict[tuple[str, str], list[float]] = {}
    for rows in fold_rows:
        for cid, workload, pred in rows:
            out.setdefault((cid, workload), []).append(pred)
    return out


def _metrics_from_predictions(
    dataset: Dataset,
    averaged: Mapping[tuple[str, str], float],
    config_ids: Sequence[str],
) -> tuple[ConfigMetrics, ...]:
    by_config: dict[str, list[Sample]] = {}
    for s in dataset.samples:
        by_config.setdefault(s.config.id, []).append(s)

    metrics = []
    for cid in config_ids:
        y_true = []
        y_pred = []
        for s in by_config[cid]:
            key = (cid, s.events.workload)
            if key not in averaged:
                raise EvalError(f"no prediction produced for {cid}/{s.events.workload}")
            y_true.append(s.total_power_w)
            y_pred.append(averaged[key])
        r = pearson_r(y_true, y_pred) if len(y_true) >= 2 else None
        metrics.append(
            ConfigMetrics(config_id=cid, n_samples=len(y_true), mape=mape(y_true, y_pred), r=r)
        )
    return tuple(metrics)


def _aggregate(kind: str, protocol: str, metrics: Sequence[ConfigMetrics]) -> EvalReport:
    mean_mape = float(np.mean([m.mape for m in metrics]))
    rs = [m.r for m in metrics if m.r is not None]
    mean_r = float(np.mean(rs)) if rs else None
    return EvalReport(
        kind=kind,
        protocol=protocol,
        per_config=tuple(metrics),
        mean_mape=mean_mape,
        mean_r=mean_r,
    )


def run_protocol(
    dataset: Dataset,
    kind: str,
    protocol: str,
    *,
    n_train: int | None = None,
    opts: TrainOptions | None = None,
    defaults: ResourceParams | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Cross-validate one model kind under a protocol and aggregate."""
    plan = make_split_plan(dataset, protocol, n_train)
    raw = fold_predictions(dataset, kind, plan, opts=opts, defaults=defaults, jobs=jobs)
    averaged = {key: float(np.mean(vals)) for key, vals in raw.items()}
    tested_ids = [cid for cid in dataset.config_ids() if any(k[0] == cid for k in averaged)]
    metrics = _metrics_from_predictions(dataset, averaged, tested_ids)
    label = protocol if n_train is None else f"{protocol}:{n_train}"
    return _aggregate(kind, label, metrics)


def run_special_case(
    dataset: Dataset,
    kind: str,
    *,
    test_ids: Sequence[str] = SPECIAL_TEST_IDS,
    opts: TrainOptions | None = None,
    defaults: ResourceParams | None = None,
) -> EvalReport:
    """Train on every design not listed in ``test_ids``, test on those."""
    all_ids = dataset.config_ids()
    test_set = set(test_ids)
    missing = sorted(test_set - set(all_ids))
    if missing:
        raise EvalError(f"test designs absent from dataset: {missing}")
    train_samples = [s for s in dataset.samples if s.config.id not in test_set]
    test_samples = [s for s in dataset.samples if s.config.id in test_set]
    if not train_samples:
        raise EvalError("special-case protocol left no training samples")
    model = train_model(kind, train_samples, opts, defaults)
    preds = predict_total_batch(kind, model, test_samples)
    averaged = {
        (s.config.id, s.events.workload): float(p) for s, p in zip(test_samples, preds)
    }
    ordered_test = [cid for cid in all_ids if cid in test_set]
    metrics = _metrics_from_predictions(dataset, averaged, ordered_test)
    return _aggregate(kind, "special-case", metrics)


# ---------------------------------------------------------------------------
# Resource diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResourceGroup:
    amount: float
    config_ids: tuple[str, ...]
    mean_power_w: float
    std_power_w: float
    mean_power_per_unit: float
    std_power_per_unit: float


@dataclass(frozen=True)
class DiagnosticsReport:
    component: ComponentId
    groups: tuple[ResourceGroup, ...]
    power_spread: float | None
    per_unit_spread: float | None
    note: str | None
    scatter: tuple[tuple[str, str, float, float], ...]


def _rel_spread(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=np.float64)
    center = float(arr.mean())
    if center == 0.0:
        raise EvalError("relative spread undefined around zero mean")
    return float(arr.std() / abs(center))


def resource_diagnostics(
    dataset: Dataset,
    component: ComponentId,
    params: ResourceParams | None = None,
) -> DiagnosticsReport:
    """Group designs by the component's resource amount and compare the
    spread of raw power against the spread of power per resource unit.

    When the resource function is right, dividing power by the amount
    should collapse most of the variation between groups. ``params``
    defaults to biases fitted from the dataset itself.
    """
    component = ComponentId(component)
    samples = [s for s in dataset.samples if s.component_power_w is not None]
    if not samples:
        raise EvalError("diagnostics need per-component power labels")
    if params is None:
        params = fit_resource_params(samples, default_resource_params())

    groups: dict[float, dict[str, list[float]]] = {}
    scatter = []
    for s in samples:
        amount = float(eval_resource(component, s.config, params))
        if amount <= 0.0:
            raise EvalError(f"nonpositive resource amount for {s.config.id}")
        power = s.component_power_w[component]
        groups.setdefault(amount, {}).setdefault(s.config.id, []).append(power)
        scatter.append((s.config.id, s.events.workload, amount, power))

    rows = []
    for amount in sorted(groups):
        per_config = groups[amount]
        powers = np.array([p for vals in per_config.values() for p in vals], dtype=np.float64)
        rows.append(
            ResourceGroup(
                amount=amount,
                config_ids=tuple(sorted(per_config, key=lambda c: (len(c), c))),
                mean_power_w=float(powers.mean()),
                std_power_w=float(powers.std()),
                mean_power_per_unit=float(powers.mean() / amount),
                std_power_per_unit=float(powers.std() / amount),
            )
        )

    if len(rows) < 2:
        power_spread = None
        per_unit_spread = None
        note = "single resource amount across designs; between-group spread undefined"
    else:
        power_spread = _rel_spread([g.mean_power_w for g in rows])
        per_unit_spread = _rel_spread([g.mean_power_per_unit for g in rows])
        note = None

    return DiagnosticsReport(
        component=component,
        groups=tuple(rows),
        power_spread=power_spread,
        per_unit_spread=per_unit_spread,
        note=note,
        scatter=tuple(scatter),
    )


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------


def report_to_obj(report: EvalReport) -> dict:
    return {
        "kind": report.kind,
        "protocol": report.protocol,
        "mean_mape": report.mean_mape,
        "mean_r": report.mean_r,
        "per_config": [
            {
                "config_id": m.config_id,
                "n_samples": m.n_samples,
                "mape": m.mape,
                "r": m.r,
            }
            for m in report.per_config
        ],
    }


def write_report_json(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_obj(report), indent=2) + "\n", encoding="utf-8")


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_id", "n_samples", "mape", "r"])
        for m in report.per_config:
            writer.writerow([m.config_id, m.n_samples, repr(m.mape), "" if m.r is None else repr(m.r)])


def diagnostics_to_obj(diag: DiagnosticsReport) -> dict:
    return {
        "component": diag.component.value,
        "power_spread": diag.power_spread,
        "per_unit_spread": diag.per_unit_spread,
        "note": diag.note,
        "groups": [
            {
                "amount": g.amount,
                "config_ids": list(g.config_ids),
                "mean_power_w": g.mean_power_w,
                "std_power_w": g.std_power_w,
                "mean_power_per_unit": g.mean_power_per_unit,
                "std_power_per_unit": g.std_power_per_unit,
            }
            for g in diag.groups
        ],
    }


def write_diagnostics_scatter_csv(diag: DiagnosticsReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_id", "workload", "resource_amount", "power_w"])
        for config_id, workload, amount, power in diag.scatter:
            writer.writerow([config_id, workload, repr(float(amount)), repr(float(power))])
