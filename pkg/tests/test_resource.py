"""Resource functions: the closed-form table, bias fitting, config io."""

import json

import numpy as np
import pytest

from panda.components import BIASED_COMPONENTS, ComponentId
from panda.dataset import Dataset, EventVector, Sample, TechnologyNode, builtin_configurations
from panda.resource import (
    ResourceError,
    ResourceFitWarning,
    ResourceParams,
    eval_resource,
    fit_resource_params,
    load_resource_config,
    resource_params_from_obj,
    resource_params_to_obj,
    save_resource_config,
)

FIXED = ResourceParams(itlb_bias=4.0, dtlb_bias=8.0, otherlogic_bias=2.0, fitted=True)

# Independent restatement of the per-component formulas, written over the raw
# knob dict rather than the package's dispatch chain.
ORACLE = {
    ComponentId.BP: lambda p, b: p["FetchWidth"],
    ComponentId.IFU: lambda p, b: p["DecodeWidth"],
    ComponentId.ITLB: lambda p, b: p["DTLBEntry"] + b.itlb_bias,
    ComponentId.ICACHE: lambda p, b: p["ICacheWay"] * p["ICacheFetchBytes"],
    ComponentId.RNU: lambda p, b: p["DecodeWidth"],
    ComponentId.ROB: lambda p, b: p["RobEntry"],
    ComponentId.ISU: lambda p, b: b.reserve_station(p["DecodeWidth"]),
    ComponentId.REGFILE: lambda p, b: p["IntPhyRegister"] + p["FpPhyRegister"],
    ComponentId.FUPOOL: lambda p, b: 1.0,
    ComponentId.LSU: lambda p, b: p["LDQEntry"] + p["STQEntry"],
    ComponentId.DTLB: lambda p, b: p["DTLBEntry"] + b.dtlb_bias,
    ComponentId.DCACHE: lambda p, b: p["DCacheWay"] * p["MemIssueWidth"],
    ComponentId.OTHER_LOGIC: lambda p, b: p["DecodeWidth"] + b.otherlogic_bias,
}

# Three design points worked out by hand, as a guard against the oracle and
# the package sharing one mistake. Component order follows ComponentId.
HAND_CHECKED = {
    "C1": (4, 1, 12, 4, 1, 16, 1, 72, 1, 8, 16, 2, 3),
    "C9": (8, 3, 36, 32, 3, 114, 3, 224, 1, 64, 40, 16, 5),
    "SP2": (8, 5, 36, 8, 5, 140, 5, 280, 1, 72, 40, 4, 7),
}


def test_resource_table_matches_oracle_for_all_builtin_configs():
    for cfg in builtin_configurations(include_special=True):
        params = cfg.params()
        for comp in ComponentId:
            got = eval_resource(comp, cfg, FIXED)
            assert got == float(ORACLE[comp](params, FIXED)), (cfg.id, comp)
            assert got > 0.0


def test_resource_table_matches_hand_checked_rows():
    configs = {c.id: c for c in builtin_configurations(include_special=True)}
    for cfg_id, expected in HAND_CHECKED.items():
        got = tuple(eval_resource(comp, configs[cfg_id], FIXED) for comp in ComponentId)
        assert got == tuple(float(v) for v in expected), cfg_id


def test_biased_components_require_fitted_params():
    cfg = builtin_configurations()[0]
    for comp in BIASED_COMPONENTS:
        with pytest.raises(ResourceError):
            eval_resource(comp, cfg)
        with pytest.raises(ResourceError):
            eval_resource(comp, cfg, ResourceParams(itlb_bias=4.0, fitted=False))
    for comp in ComponentId:
        if comp not in BIASED_COMPONENTS:
            assert eval_resource(comp, cfg) == eval_resource(comp, cfg, FIXED)


def test_reserve_station_lookup_overrides_identity():
    cfg = builtin_configurations()[14]  # C15, DecodeWidth 5
    assert eval_resource(ComponentId.ISU, cfg, FIXED) == 5.0
    table = ResourceParams(
        itlb_bias=4.0,
        dtlb_bias=8.0,
        otherlogic_bias=2.0,
        reserve_station_lookup={5: 52.0},
        fitted=True,
    )
    assert eval_resource(ComponentId.ISU, cfg, table) == 52.0
    with pytest.raises(ResourceError):
        table.reserve_station(3)


def test_params_validation():
    with pytest.raises(ResourceError):
        ResourceParams(itlb_bias=-1.0)
    with pytest.raises(ResourceError):
        ResourceParams(dtlb_bias=float("nan"))
    with pytest.raises(ResourceError):
        ResourceParams(reserve_station_lookup={0: 1.0})
    with pytest.raises(ResourceError):
        ResourceParams(reserve_station_lookup={1: 0.0})
    with pytest.raises(ResourceError):
        ResourceParams().bias(ComponentId.ROB)


def _linear_power_dataset(itlb_bias=4.0, dtlb_bias=8.0, other_bias=2.0, slope_sign=1.0):
    """Noise-free dataset whose biased-component powers are exactly linear in
    their driving knobs with the given offsets."""
    samples = []
    for cfg in builtin_configurations(include_special=False):
        per = {c: 0.1 for c in ComponentId}
        per[ComponentId.ITLB] = slope_sign * 0.01 * (cfg.DTLBEntry + itlb_bias)
        per[ComponentId.DTLB] = 0.02 * (cfg.DTLBEntry + dtlb_bias)
        per[ComponentId.OTHER_LOGIC] = 0.05 * (cfg.DecodeWidth + other_bias)
        if slope_sign < 0:
            per[ComponentId.ITLB] += 1.0  # keep power non-negative
        total = sum(per.values())
        events = EventVector(workload="w", counts={"numCycles": 100}, baseline_cycles=100)
        samples.append(
            Sample(
                config=cfg,
                tech=TechnologyNode(name="40nm", feature_size_nm=40.0, voltage_v=1.1),
                events=events,
                total_power_w=total,
                component_power_w=per,
            )
        )
    return Dataset(samples=tuple(samples))


def test_fit_recovers_known_biases_on_noise_free_data():
    fitted = fit_resource_params(_linear_power_dataset())
    assert fitted.fitted
    assert fitted.itlb_bias == pytest.approx(4.0, rel=1e-9)
    assert fitted.dtlb_bias == pytest.approx(8.0, rel=1e-9)
    assert fitted.otherlogic_bias == pytest.approx(2.0, rel=1e-9)


def test_fit_carries_lookup_from_defaults():
    defaults = ResourceParams(reserve_station_lookup={1: 2.0, 5: 52.0})
    fitted = fit_resource_params(_linear_power_dataset(), defaults)
    assert fitted.reserve_station_lookup == {1: 2.0, 5: 52.0}


def test_fit_falls_back_on_degenerate_knob_values():
    ds = _linear_power_dataset()
    flat = Dataset(samples=tuple(s for s in ds.samples if s.config.DTLBEntry == 8))
    defaults = ResourceParams(itlb_bias=1.5, dtlb_bias=2.5)
    with pytest.warns(ResourceFitWarning, match="distinct"):
        fitted = fit_resource_params(flat, defaults)
    assert fitted.itlb_bias == 1.5
    assert fitted.dtlb_bias == 2.5
    # DecodeWidth still varies inside the DTLBEntry == 8 subset
    assert fitted.otherlogic_bias == pytest.approx(2.0, rel=1e-9)


def test_fit_falls_back_on_negative_slope():
    ds = _linear_power_dataset(slope_sign=-1.0)
    with pytest.warns(ResourceFitWarning, match="slope"):
        fitted = fit_resource_params(ds)
    assert fitted.itlb_bias == 0.0
    assert fitted.dtlb_bias == pytest.approx(8.0, rel=1e-9)


def test_fit_requires_component_power_labels():
    ds = _linear_power_dataset()
    bare = Sample(
        config=ds.samples[0].config,
        tech=ds.samples[0].tech,
        events=ds.samples[0].events,
        total_power_w=1.0,
    )
    with pytest.raises(ResourceError, match="per-component"):
        fit_resource_params([bare])
    with pytest.raises(ResourceError):
        fit_resource_params([])


def test_resource_config_file_round_trip(tmp_path):
    params = ResourceParams(
        itlb_bias=3.5,
        dtlb_bias=7.25,
        otherlogic_bias=1.0,
        reserve_station_lookup={1: 2.0, 2: 6.0, 3: 12.0},
    )
    path = tmp_path / "resource.json"
    save_resource_config(params, path)
    loaded = load_resource_config(path)
    assert loaded == params
    assert not loaded.fitted


def test_resource_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"biases": {}}))
    with pytest.raises(ResourceError, match="biases"):
        load_resource_config(path)
    path.write_text(json.dumps({"default_biases": {"itlb": 1, "rob": 2}}))
    with pytest.raises(ResourceError, match="rob"):
        load_resource_config(path)
    path.write_text("{nope")
    with pytest.raises(ResourceError, match="invalid JSON"):
        load_resource_config(path)


def test_params_obj_round_trip():
    for params in (FIXED, ResourceParams(reserve_station_lookup={2: 5.0})):
        obj = json.loads(json.dumps(resource_params_to_obj(params)))
        assert resource_params_from_obj(obj) == params


def test_bulk_evaluation_is_fast():
    configs = builtin_configurations(include_special=True)
    values = np.array(
        [[eval_resource(comp, cfg, FIXED) for comp in ComponentId] for cfg in configs]
    )
    assert values.shape == (17, 13)
    assert (values > 0).all()
