"""Evaluation harness: metrics, protocols, leakage isolation, diagnostics."""

import csv
import dataclasses
import json

import numpy as np
import pytest

from panda.components import ComponentId
from panda.dataset import Dataset
from panda.evalharness import (
    EvalError,
    MODEL_KINDS,
    fold_predictions,
    make_split_plan,
    mape,
    pearson_r,
    predict_total_batch,
    resource_diagnostics,
    run_protocol,
    run_special_case,
    train_model,
    write_diagnostics_scatter_csv,
    write_report_csv,
    write_report_json,
)
from panda.regressor import TrainOptions
from panda.synth import default_synth_spec, generate, true_resource_params

FAST = TrainOptions(n_trees=15, max_depth=3)


def _poison_config(dataset, config_id, factor=10.0):
    samples = []
    for s in dataset.samples:
        if s.config.id == config_id:
            per = {c: v * factor for c, v in s.component_power_w.items()}
            s = dataclasses.replace(
                s, total_power_w=s.total_power_w * factor, component_power_w=per
            )
        samples.append(s)
    return Dataset(samples=tuple(samples))


def test_mape_hand_values():
    assert mape([1.0, 2.0], [1.1, 1.8]) == pytest.approx(0.10, abs=1e-12)
    assert mape([4.0], [4.0]) == 0.0
    with pytest.raises(EvalError):
        mape([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(EvalError):
        mape([1.0, 2.0], [1.0])
    with pytest.raises(EvalError):
        mape([], [])


def test_pearson_exact_unit_cases():
    x = [1.0, 2.0, 3.0]
    assert pearson_r(x, [2.0, 4.0, 6.0]) == 1.0
    assert pearson_r(x, [-2.0, -4.0, -6.0]) == -1.0
    assert pearson_r(x, [3.0, 3.0, 3.0]) is None
    with pytest.raises(EvalError):
        pearson_r([1.0], [1.0])
    r = pearson_r([1.0, 2.0, 3.0, 4.0], [1.1, 1.9, 3.2, 3.8])
    assert 0.9 < r < 1.0


def test_train_model_dispatch_validates_kind():
    ds = generate(default_synth_spec(41))
    with pytest.raises(EvalError, match="kind"):
        train_model("xgboost", ds, FAST)
    with pytest.raises(EvalError, match="kind"):
        predict_total_batch("xgboost", None, ds.samples)
    assert MODEL_KINDS == ("panda", "global-ml", "component-ml", "analytical")


def test_make_split_plan_validation():
    ds = generate(default_synth_spec(42))
    with pytest.raises(EvalError, match="n_train"):
        make_split_plan(ds, "known-n")
    with pytest.raises(EvalError, match="protocol"):
        make_split_plan(ds, "jackknife")
    plan = make_split_plan(ds, "known-n", 13)
    assert len(plan.folds) == 15
    assert len(make_split_plan(ds, "unknown-domain").folds) == 5


def test_run_protocol_report_structure():
    ds = generate(default_synth_spec(43))
    report = run_protocol(ds, "panda", "known-n", n_train=13, opts=FAST)
    assert report.kind == "panda"
    assert report.protocol == "known-n:13"
    assert [m.config_id for m in report.per_config] == list(ds.config_ids())
    assert all(m.n_samples == 8 for m in report.per_config)
    assert report.mean_mape == pytest.approx(
        float(np.mean([m.mape for m in report.per_config]))
    )
    assert report.mean_r is not None and report.mean_r > 0.5


def test_fold_prediction_multiplicity():
    ds = generate(default_synth_spec(44))
    plan = make_split_plan(ds, "known-n", 13)
    raw = fold_predictions(ds, "panda", plan, opts=FAST)
    assert len(raw) == 15 * 8
    # every design is tested in exactly 15 - 13 = 2 folds
    assert all(len(v) == 2 for v in raw.values())


def test_fold_predictions_use_only_their_training_labels():
    ds = generate(default_synth_spec(45))
    plan = make_split_plan(ds, "known-n", 13)
    clean = fold_predictions(ds, "panda", plan, opts=FAST)
    poisoned = fold_predictions(_poison_config(ds, "C1"), "panda", plan, opts=FAST)
    workloads = ds.workloads()
    for wl in workloads:
        # C1 is tested by folds 0 and 14, neither of which trains on C1, so
        # scaling C1's labels must not move either prediction
        assert poisoned[("C1", wl)] == clean[("C1", wl)]
        # C2 is tested by folds 0 (trains C3..C15) and 1 (trains C4..C15 + C1):
        # only the second sees the poisoned labels
        assert poisoned[("C2", wl)][0] == clean[("C2", wl)][0]
        assert poisoned[("C2", wl)][1] != clean[("C2", wl)][1]
        # C15 is tested by folds 13 (trains C1..C12) and 14 (trains C2..C14)
        assert poisoned[("C15", wl)][0] != clean[("C15", wl)][0]
        assert poisoned[("C15", wl)][1] == clean[("C15", wl)][1]


def test_parallel_fold_execution_is_identical():
    ds = generate(default_synth_spec(46))
    plan = make_split_plan(ds, "known-n", 12)
    serial = fold_predictions(ds, "panda", plan, opts=FAST, jobs=1)
    parallel = fold_predictions(ds, "panda", plan, opts=FAST, jobs=4)
    assert serial == parallel
    with pytest.raises(EvalError):
        fold_predictions(ds, "panda", plan, opts=FAST, jobs=0)


def test_run_special_case():
    ds = generate(default_synth_spec(47, include_special=True))
    report = run_special_case(ds, "panda", opts=FAST)
    assert report.protocol == "special-case"
    assert [m.config_id for m in report.per_config] == ["SP1", "SP2"]
    assert all(m.n_samples == 8 for m in report.per_config)
    plain = generate(default_synth_spec(47))
    with pytest.raises(EvalError, match="SP1"):
        run_special_case(plain, "panda", opts=FAST)


def test_analytical_reports_no_correlation():
    ds = generate(default_synth_spec(48))
    with pytest.warns(UserWarning):
        report = run_protocol(ds, "analytical", "known-n", n_train=13)
    # workload-independent predictions: zero variance within every design
    assert all(m.r is None for m in report.per_config)
    assert report.mean_r is None


def test_report_writers(tmp_path):
    ds = generate(default_synth_spec(49))
    report = run_protocol(ds, "panda", "known-n", n_train=13, opts=FAST)
    jpath = tmp_path / "report.json"
    cpath = tmp_path / "report.csv"
    write_report_json(report, jpath)
    write_report_csv(report, cpath)

    obj = json.loads(jpath.read_text())
    assert obj["kind"] == "panda"
    assert obj["protocol"] == "known-n:13"
    assert obj["mean_mape"] == report.mean_mape
    assert len(obj["per_config"]) == 15

    with open(cpath, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["config_id", "n_samples", "mape", "r"]
    assert len(rows) == 16
    # repr round-trips the floats exactly
    assert float(rows[1][2]) == report.per_config[0].mape
    assert float(rows[1][3]) == report.per_config[0].r


def test_none_correlation_written_as_empty_cell(tmp_path):
    ds = generate(default_synth_spec(50))
    with pytest.warns(UserWarning):
        report = run_protocol(ds, "analytical", "known-n", n_train=13)
    cpath = tmp_path / "ana.csv"
    write_report_csv(report, cpath)
    with open(cpath, newline="") as fh:
        rows = list(csv.reader(fh))
    assert all(row[3] == "" for row in rows[1:])


def test_dcache_diagnostics_groups_and_spreads():
    ds = generate(default_synth_spec(51))
    diag = resource_diagnostics(ds, ComponentId.DCACHE, true_resource_params())
    # DCacheWay * MemIssueWidth over C1..C15 takes the amounts 2, 4, 8, 16
    assert [g.amount for g in diag.groups] == [2.0, 4.0, 8.0, 16.0]
    assert diag.groups[0].config_ids == ("C1",)
    assert diag.groups[1].config_ids == ("C2", "C4", "C5")
    assert diag.groups[2].config_ids == ("C3", "C6", "C7", "C8", "C10")
    assert diag.groups[3].config_ids == ("C9", "C11", "C12", "C13", "C14", "C15")
    assert diag.per_unit_spread < diag.power_spread
    assert diag.note is None
    assert len(diag.scatter) == 15 * 8
    # fitting the biases from the data itself gives the same grouping
    fitted = resource_diagnostics(ds, ComponentId.DCACHE)
    assert [g.amount for g in fitted.groups] == [2.0, 4.0, 8.0, 16.0]


def test_diagnostics_single_group_note():
    ds = generate(default_synth_spec(52))
    diag = resource_diagnostics(ds, ComponentId.FUPOOL, true_resource_params())
    assert len(diag.groups) == 1
    assert diag.power_spread is None
    assert diag.per_unit_spread is None
    assert "single resource amount" in diag.note


def test_diagnostics_require_component_labels():
    ds = generate(default_synth_spec(53))
    stripped = Dataset(
        samples=tuple(
            dataclasses.replace(s, component_power_w=None) for s in ds.samples
        )
    )
    with pytest.raises(EvalError, match="labels"):
        resource_diagnostics(stripped, ComponentId.DCACHE)


def test_scatter_csv_format(tmp_path):
    ds = generate(default_synth_spec(54))
    diag = resource_diagnostics(ds, ComponentId.DCACHE, true_resource_params())
    path = tmp_path / "scatter.csv"
    write_diagnostics_scatter_csv(diag, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["config_id", "workload", "resource_amount", "power_w"]
    assert len(rows) == 1 + len(diag.scatter)
    assert float(rows[1][2]) == diag.scatter[0][2]
    assert float(rows[1][3]) == diag.scatter[0][3]
