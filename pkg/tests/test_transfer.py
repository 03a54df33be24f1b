"""Cross-technology transfer: scaling rule, ratio model, io."""

import json

import numpy as np
import pytest

from panda.dataset import DatasetParseError, TechnologyNode
from panda.regressor import ModelVersionError, TrainOptions
from panda.synth import default_synth_spec, generate_multitech, node_power
from panda.transfer import (
    TRANSFER_FEATURE_NAMES,
    TransferError,
    TransferFitWarning,
    TransferSample,
    build_transfer_features,
    cv2_scale,
    load_transfer_model,
    load_transfer_samples,
    predict_transferred_power,
    save_transfer_model,
    save_transfer_samples,
    train_transfer,
)

N28 = TechnologyNode("28nm", 28.0, 0.8)
N40 = TechnologyNode("40nm", 40.0, 1.1)
N65 = TechnologyNode("65nm", 65.0, 1.2)


def test_cv2_scale_worked_factor():
    # 28nm/0.8V -> 40nm/1.1V: factor (40/28) * (1.1/0.8)^2
    want = (40.0 / 28.0) * (1.1 / 0.8) ** 2
    assert abs(want - 2.700892857142857) < 1e-15
    assert cv2_scale(1.0, N28, N40) == pytest.approx(2.700892857142857, abs=1e-12)
    assert cv2_scale(0.5, N28, N40) == pytest.approx(0.5 * want, rel=1e-15)
    # identity pair scales by exactly 1
    assert cv2_scale(0.73, N40, N40) == 0.73
    with pytest.raises(TransferError):
        cv2_scale(-1.0, N28, N40)


def test_transfer_feature_row():
    row = build_transfer_features(0.2, N28, N40)
    assert tuple(row) == TRANSFER_FEATURE_NAMES
    assert row["source_power"] == 0.2
    assert row["feature_size_ratio"] == 40.0 / 28.0
    assert row["voltage_ratio"] == 1.1 / 0.8
    assert row["cv2_scaled_power"] == cv2_scale(0.2, N28, N40)


def test_transfer_sample_validation():
    with pytest.raises(ValueError):
        TransferSample(design_id="", source=N28, target=N40, source_power_w=1.0, target_power_w=1.0)
    with pytest.raises(ValueError):
        TransferSample(design_id="d", source=N28, target=N40, source_power_w=0.0, target_power_w=1.0)


def test_model_learns_systematic_deviation_from_cv2():
    spec = default_synth_spec(21, noise_rel=0.0)
    corpus = generate_multitech(spec, n_designs=24)
    train = [s for s in corpus if not s.design_id.endswith(("0", "1"))]
    test = [s for s in corpus if s.design_id.endswith(("0", "1"))]
    model = train_transfer(train, TrainOptions(n_trees=200, max_depth=4))
    model_err = []
    cv2_err = []
    for s in test:
        pred = predict_transferred_power(model, s.source_power_w, s.source, s.target)
        model_err.append(abs(pred - s.target_power_w) / s.target_power_w)
        scaled = cv2_scale(s.source_power_w, s.source, s.target)
        cv2_err.append(abs(scaled - s.target_power_w) / s.target_power_w)
    assert float(np.mean(model_err)) < 0.05
    # first-order scaling misses the size-exponent excess by >= 10%
    assert float(np.mean(cv2_err)) > 0.10
    assert float(np.mean(model_err)) < float(np.mean(cv2_err))


def test_single_pair_training_warns():
    spec = default_synth_spec(22)
    corpus = [s for s in generate_multitech(spec, n_designs=6)
              if s.source.name == "28nm" and s.target.name == "40nm"]
    with pytest.warns(TransferFitWarning, match="single node pair"):
        train_transfer(corpus, TrainOptions(n_trees=5))
    with pytest.raises(TransferError):
        train_transfer(corpus[:1])


def test_prediction_scales_source_power():
    spec = default_synth_spec(23, noise_rel=0.0)
    corpus = generate_multitech(spec, n_designs=12)
    model = train_transfer(corpus, TrainOptions(n_trees=50))
    # noiseless corpus: ratio for a pair is a constant, so prediction of any
    # design's source power lands on the true target power
    s = corpus[0]
    pred = predict_transferred_power(model, s.source_power_w, s.source, s.target)
    assert pred == pytest.approx(s.target_power_w, rel=1e-3)
    p65 = node_power(spec, "d00", N65)
    p28 = node_power(spec, "d00", N28)
    pred65 = predict_transferred_power(model, p28, N28, N65)
    assert pred65 == pytest.approx(p65, rel=1e-3)


def test_samples_jsonl_round_trip(tmp_path):
    spec = default_synth_spec(24)
    corpus = generate_multitech(spec, n_designs=3)
    path = tmp_path / "xfer.jsonl"
    save_transfer_samples(corpus, path)
    loaded = load_transfer_samples(path)
    assert loaded == corpus
    save_transfer_samples(loaded, tmp_path / "xfer2.jsonl")
    assert path.read_bytes() == (tmp_path / "xfer2.jsonl").read_bytes()


def test_samples_jsonl_strictness(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = {
        "design_id": "d00",
        "source": {"name": "28nm", "feature_size_nm": 28.0, "voltage_v": 0.8},
        "target": {"name": "40nm", "feature_size_nm": 40.0, "voltage_v": 1.1},
        "source_power_w": 0.1,
        "target_power_w": 0.27,
    }
    bad = dict(good)
    bad["units"] = "W"
    path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(DatasetParseError, match=r"bad\.jsonl:2.*units"):
        load_transfer_samples(path)
    missing = {k: v for k, v in good.items() if k != "target_power_w"}
    path.write_text(json.dumps(missing) + "\n")
    with pytest.raises(DatasetParseError, match="target_power_w"):
        load_transfer_samples(path)
    nested = json.loads(json.dumps(good))
    nested["source"]["fin"] = True
    path.write_text(json.dumps(nested) + "\n")
    with pytest.raises(DatasetParseError, match="fin"):
        load_transfer_samples(path)


def test_model_round_trip(tmp_path):
    spec = default_synth_spec(25)
    corpus = generate_multitech(spec, n_designs=8)
    model = train_transfer(corpus, TrainOptions(n_trees=30))
    path = tmp_path / "xfer-model.json"
    save_transfer_model(model, path)
    loaded = load_transfer_model(path)
    assert loaded == model
    s = corpus[7]
    assert predict_transferred_power(loaded, s.source_power_w, s.source, s.target) == (
        predict_transferred_power(model, s.source_power_w, s.source, s.target)
    )
    path.write_text(json.dumps({"format": "panda-xfer-0"}))
    with pytest.raises(ModelVersionError):
        load_transfer_model(path)
