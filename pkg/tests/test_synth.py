"""Synthetic generator: determinism, oracle agreement, law structure."""

import numpy as np
import pytest

from panda.components import ComponentId, EVENT_REGISTRY
from panda.dataset import builtin_configurations, save_dataset
from panda.resource import eval_resource
from panda.synth import (
    ComponentLaw,
    DEFAULT_WORKLOAD_NAMES,
    SynthError,
    SynthSpec,
    config_size_score,
    default_synth_spec,
    default_technology_nodes,
    exact_affine_spec,
    generate,
    generate_multitech,
    make_workload_profile,
    node_power,
    oracle_component_power,
    oracle_events_provider,
    oracle_true_cycles,
    oracle_true_power,
    true_resource_params,
)


def test_generation_is_deterministic(tmp_path):
    a = generate(default_synth_spec(7))
    b = generate(default_synth_spec(7))
    assert a == b
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(a, pa)
    save_dataset(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    c = generate(default_synth_spec(8))
    assert c != a


def test_sample_content_is_independent_of_generation_order():
    forward = generate(default_synth_spec(3))
    spec = default_synth_spec(3)
    reversed_spec = SynthSpec(
        seed=spec.seed,
        configs=tuple(reversed(spec.configs)),
        workloads=spec.workloads,
        noise_rel=spec.noise_rel,
    )
    backward = generate(reversed_spec)
    by_key = {(s.config.id, s.events.workload): s for s in backward.samples}
    for s in forward.samples:
        assert by_key[(s.config.id, s.events.workload)] == s


def test_noiseless_generation_matches_oracles():
    spec = default_synth_spec(5, noise_rel=0.0)
    ds = generate(spec)
    for s in ds.samples:
        oracle = oracle_component_power(spec, s.config, s.events.workload)
        for comp in ComponentId:
            assert s.component_power_w[comp] == oracle[comp], (s.config.id, comp)
        assert s.true_cycles == oracle_true_cycles(spec, s.config, s.events.workload)
        for comp in ComponentId:
            law = spec.area_laws[comp]
            amount = eval_resource(comp, s.config, spec.resource_params)
            want = law.base + law.resource_coef * amount**law.nonlinearity
            assert s.component_area_um2[comp] == pytest.approx(want, rel=1e-12)
    # oracle total power is the workload mean of the component sums
    cfg = spec.configs[0]
    sums = [
        sum(oracle_component_power(spec, cfg, w.name).values()) for w in spec.workloads
    ]
    assert oracle_true_power(spec, cfg) == pytest.approx(float(np.mean(sums)), rel=1e-12)


def test_total_power_is_exact_component_sum():
    ds = generate(default_synth_spec(9))
    for s in ds.samples:
        acc = 0.0
        for comp in ComponentId:
            acc += s.component_power_w[comp]
        assert s.total_power_w == acc


def test_counts_are_rounded_rates_and_cycles_consistent():
    spec = default_synth_spec(2, noise_rel=0.0)
    ds = generate(spec)
    for s in ds.samples[:16]:
        base = s.events.baseline_cycles
        assert s.events.counts["numCycles"] == base
        profile = next(w for w in spec.workloads if w.name == s.events.workload)
        size = config_size_score(s.config)
        for event in EVENT_REGISTRY:
            if event == "numCycles":
                continue
            rate = max(0.0, profile.rates[event] * (1.0 + profile.amps[event] * (size - 0.6)))
            assert s.events.counts[event] == int(round(rate * base)), event


def test_noisy_powers_stay_near_oracle():
    spec = default_synth_spec(4, noise_rel=0.05)
    ds = generate(spec)
    for s in ds.samples:
        oracle = oracle_component_power(spec, s.config, s.events.workload)
        for comp in ComponentId:
            rel = abs(s.component_power_w[comp] - oracle[comp]) / oracle[comp]
            assert rel < 3 * spec.noise_rel, (s.config.id, comp)


def test_config_size_score_scale():
    configs = {c.id: c for c in builtin_configurations(include_special=True)}
    assert config_size_score(configs["C15"]) == pytest.approx(1.0, abs=1e-12)
    g1 = config_size_score(configs["C1"])
    assert 0.2 < g1 < 0.35
    assert g1 < config_size_score(configs["C8"]) < config_size_score(configs["C15"])
    # SP2 shrinks only the caches relative to C15
    assert config_size_score(configs["SP2"]) < 1.0


def test_baseline_cycles_deviate_by_decode_width_ratio():
    spec = default_synth_spec(6, noise_rel=0.0)
    ds = generate(spec)
    for s in ds.samples:
        ratio = s.true_cycles / s.events.baseline_cycles
        want = 1.1 + 0.3 * (s.config.DecodeWidth - 1) / 4.0
        assert ratio == pytest.approx(want, rel=1e-3)
        assert s.true_cycles > s.events.baseline_cycles


def test_workload_profiles_are_stable_and_in_range():
    assert len(DEFAULT_WORKLOAD_NAMES) == 8
    p1 = make_workload_profile("qsort")
    p2 = make_workload_profile("qsort")
    assert p1 == p2
    assert p1 != make_workload_profile("rsort")
    assert 120_000 <= p1.base_cycles <= 480_000
    assert 0.0 <= p1.size_sensitivity <= 0.25
    for event, rate in p1.rates.items():
        lowered = event.lower()
        if "miss" in lowered or "mshr" in lowered or "incorrect" in lowered:
            assert 0.0005 <= rate <= 0.03, event
        elif "cycles" in lowered:
            assert 0.1 <= rate <= 0.8, event
        else:
            assert 0.02 <= rate <= 0.7, event
    for amp in p1.amps.values():
        assert abs(amp) <= 0.35


def test_spec_validation():
    cfgs = builtin_configurations()
    with pytest.raises(SynthError, match="distinct"):
        SynthSpec(configs=(cfgs[0], cfgs[0]))
    with pytest.raises(SynthError, match="workload"):
        SynthSpec(workloads=())
    with pytest.raises(SynthError, match="noise"):
        default_synth_spec(0, noise_rel=1.0)
    with pytest.raises(SynthError):
        ComponentLaw(-1.0, 0.1, 0.0)
    with pytest.raises(SynthError):
        ComponentLaw(0.0, 0.1, 0.0, nonlinearity=3.0)
    laws = {c: ComponentLaw(0.0, 0.01, 0.0) for c in ComponentId if c is not ComponentId.BP}
    with pytest.raises(SynthError, match="BP"):
        SynthSpec(component_laws=laws)


def test_exact_affine_spec_power_is_affine_in_resource():
    spec = exact_affine_spec(1)
    ds = generate(spec)
    params = true_resource_params()
    for s in ds.samples:
        for comp in ComponentId:
            law = spec.component_laws[comp]
            amount = eval_resource(comp, s.config, params)
            assert s.component_power_w[comp] == law.base + law.resource_coef * amount


def test_oracle_events_provider_agrees_with_generate():
    spec = default_synth_spec(10)
    ds = generate(spec)
    provider = oracle_events_provider(spec)
    events = provider(spec.configs[2])
    from_ds = [s.events for s in ds.samples if s.config.id == spec.configs[2].id]
    assert events == from_ds


def test_multitech_corpus_structure():
    spec = default_synth_spec(15)
    samples = generate_multitech(spec, n_designs=20)
    nodes = default_technology_nodes()
    assert [n.name for n in nodes] == ["28nm", "40nm", "65nm"]
    assert len(samples) == 20 * 6
    designs = sorted({s.design_id for s in samples})
    assert designs == [f"d{i:02d}" for i in range(20)]
    by_key = {(s.design_id, s.source.name, s.target.name): s for s in samples}
    fwd = by_key[("d03", "28nm", "65nm")]
    rev = by_key[("d03", "65nm", "28nm")]
    assert fwd.source_power_w == rev.target_power_w
    assert fwd.target_power_w == rev.source_power_w
    with pytest.raises(SynthError):
        generate_multitech(spec, nodes=nodes[:1])
    with pytest.raises(SynthError):
        generate_multitech(spec, n_designs=0)


def test_node_power_noiseless_scaling_exponent():
    spec = default_synth_spec(16, noise_rel=0.0)
    n28, n40, n65 = default_technology_nodes()
    p28 = node_power(spec, "d00", n28)
    p40 = node_power(spec, "d00", n40)
    p65 = node_power(spec, "d00", n65)
    assert p40 / p28 == pytest.approx((40.0 / 28.0) ** 1.45 * (1.1 / 0.8) ** 2, rel=1e-12)
    assert p65 / p40 == pytest.approx((65.0 / 40.0) ** 1.45 * (1.2 / 1.1) ** 2, rel=1e-12)
    # systematic deviation from first-order size scaling is material
    first_order = (40.0 / 28.0) * (1.1 / 0.8) ** 2
    assert abs(p40 / p28 - first_order) / first_order > 0.1
