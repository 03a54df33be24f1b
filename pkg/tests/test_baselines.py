"""Baseline models: global ML, per-component ML, analytical linear."""

import numpy as np
import pytest

from panda.components import ComponentId
from panda.baselines import (
    AnalyticalLinearModel,
    BaselineError,
    BaselineFitWarning,
    global_feature_spec,
    load_analytical,
    load_component_ml,
    load_global_ml,
    predict_analytical,
    predict_component_ml,
    predict_component_ml_batch,
    predict_global_ml,
    predict_global_ml_batch,
    save_analytical,
    save_component_ml,
    save_global_ml,
    train_analytical,
    train_component_ml,
    train_global_ml,
)
from panda.dataset import Dataset, EventVector, Sample, TechnologyNode, builtin_configurations
from panda.regressor import ModelVersionError, TrainOptions
from panda.resource import ResourceParams, eval_resource
from panda.synth import default_synth_spec, generate

TECH = TechnologyNode(name="40nm", feature_size_nm=40.0, voltage_v=1.1)
FIXED = ResourceParams(itlb_bias=4.0, dtlb_bias=8.0, otherlogic_bias=2.0, fitted=True)


def _affine_dataset():
    """Component power is exactly slope * resource + intercept, with zero
    intercepts for the biased components so their biases stay recoverable."""
    slopes = {comp: 0.002 * (i + 1) for i, comp in enumerate(ComponentId)}
    intercepts = {comp: 0.01 * (i % 3) for i, comp in enumerate(ComponentId)}
    for comp in (ComponentId.ITLB, ComponentId.DTLB, ComponentId.OTHER_LOGIC):
        intercepts[comp] = 0.0
    samples = []
    for i, cfg in enumerate(builtin_configurations(include_special=False)):
        for workload in ("wa", "wb"):
            per = {
                comp: slopes[comp] * eval_resource(comp, cfg, FIXED) + intercepts[comp]
                for comp in ComponentId
            }
            events = EventVector(
                workload=workload,
                counts={"numCycles": 500 + 11 * i, "intAluAccesses": 100 + i},
                baseline_cycles=500 + 11 * i,
            )
            samples.append(
                Sample(
                    config=cfg,
                    tech=TECH,
                    events=events,
                    total_power_w=sum(per.values()),
                    component_power_w=per,
                )
            )
    return Dataset(samples=tuple(samples)), slopes, intercepts


def test_global_spec_covers_everything():
    spec = global_feature_spec()
    names = spec.feature_names()
    assert len(names) == 17 + 70
    assert "numCycles" in names and "numCycles_rate" not in names


def test_global_ml_fits_training_data_closely():
    ds = generate(default_synth_spec(11))
    model = train_global_ml(ds, TrainOptions(n_trees=150))
    preds = predict_global_ml_batch(model, ds.samples)
    labels = np.array([s.total_power_w for s in ds.samples])
    mape = float(np.mean(np.abs(preds - labels) / labels))
    assert mape < 0.01
    one = predict_global_ml(model, ds.samples[5].config, ds.samples[5].events)
    assert one == preds[5]


def test_component_ml_total_is_exact_sum():
    ds = generate(default_synth_spec(12))
    model = train_component_ml(ds, TrainOptions(n_trees=40))
    s = ds.samples[20]
    total, breakdown = predict_component_ml(model, s.config, s.events)
    acc = 0.0
    for comp in ComponentId:
        acc += breakdown[comp]
    assert total == acc
    batch = predict_component_ml_batch(model, ds.samples[:10])
    scalar = np.array(
        [predict_component_ml(model, t.config, t.events)[0] for t in ds.samples[:10]]
    )
    assert np.array_equal(batch, scalar)


def test_component_ml_requires_labels():
    cfg = builtin_configurations()[0]
    events = EventVector(workload="w", counts={"numCycles": 10}, baseline_cycles=10)
    bare = Sample(config=cfg, tech=TECH, events=events, total_power_w=1.0)
    with pytest.raises(BaselineError, match="component"):
        train_component_ml([bare])
    with pytest.raises(BaselineError, match="empty"):
        train_global_ml([])
    with pytest.raises(BaselineError, match="empty"):
        train_analytical([])


def test_analytical_recovers_affine_laws():
    ds, slopes, intercepts = _affine_dataset()
    with pytest.warns(BaselineFitWarning):  # FUPool's amount is constant
        model = train_analytical(ds)
    for comp in ComponentId:
        slope, intercept = model.per_component[comp]
        if comp is ComponentId.FUPOOL:
            # underdetermined: line through the origin hitting the mean power
            assert slope == pytest.approx(slopes[comp] * 1.0 + intercepts[comp], rel=1e-9)
            assert intercept == 0.0
        else:
            assert slope == pytest.approx(slopes[comp], rel=1e-6), comp
            assert intercept == pytest.approx(intercepts[comp], abs=1e-8), comp
    unseen = builtin_configurations(include_special=True)[16]  # SP2
    total, breakdown = predict_analytical(model, unseen)
    want = sum(
        slopes[c] * eval_resource(c, unseen, FIXED) + intercepts[c] for c in ComponentId
    )
    assert total == pytest.approx(want, rel=1e-6)


def test_analytical_prediction_ignores_workload():
    ds = generate(default_synth_spec(13))
    with pytest.warns(BaselineFitWarning):
        model = train_analytical(ds)
    cfg = ds.samples[0].config
    totals = {predict_analytical(model, cfg)[0] for _ in range(3)}
    assert len(totals) == 1
    # no event vector in the signature at all: config fully determines output
    total, breakdown = predict_analytical(model, cfg)
    assert all(v >= 0.0 for v in breakdown.values())


def test_analytical_model_requires_all_components():
    ds, _, _ = _affine_dataset()
    with pytest.warns(BaselineFitWarning):
        model = train_analytical(ds)
    partial = {c: v for c, v in model.per_component.items() if c is not ComponentId.BP}
    with pytest.raises(BaselineError, match="BP"):
        AnalyticalLinearModel(per_component=partial, resource_params=model.resource_params)


def test_all_three_baselines_round_trip(tmp_path):
    ds = generate(default_synth_spec(14))
    gml = train_global_ml(ds, TrainOptions(n_trees=20))
    cml = train_component_ml(ds, TrainOptions(n_trees=20))
    with pytest.warns(BaselineFitWarning):
        ana = train_analytical(ds)

    save_global_ml(gml, tmp_path / "g.json")
    save_component_ml(cml, tmp_path / "c.json")
    save_analytical(ana, tmp_path / "a.json")

    g2 = load_global_ml(tmp_path / "g.json")
    c2 = load_component_ml(tmp_path / "c.json")
    a2 = load_analytical(tmp_path / "a.json")

    assert np.array_equal(
        predict_global_ml_batch(gml, ds.samples), predict_global_ml_batch(g2, ds.samples)
    )
    assert np.array_equal(
        predict_component_ml_batch(cml, ds.samples),
        predict_component_ml_batch(c2, ds.samples),
    )
    cfg = ds.samples[0].config
    assert predict_analytical(ana, cfg) == predict_analytical(a2, cfg)
    assert a2.per_component == ana.per_component

    with pytest.raises(ModelVersionError):
        load_global_ml(tmp_path / "c.json")
    with pytest.raises(ModelVersionError):
        load_analytical(tmp_path / "g.json")
