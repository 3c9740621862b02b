import json

import numpy as np
import pytest

from procqx.bundle import BundleError, ModelBundle, dataset_fingerprint, load_model, save_model
from procqx.neural_net import NetworkConfig, TrainingHistory, TrainingRound, init_network
from procqx.process_data import LabeledDataset, StandardizationParams


def _bundle(seed=0):
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(seed=seed)
    net = init_network(cfg)
    history = TrainingHistory([TrainingRound(1, 0.8, 0.5), TrainingRound(2, 0.9, 0.4)], best_epoch=2,
                              stopped_early=False)
    params = StandardizationParams(rng.normal(size=7), rng.uniform(0.5, 2.0, size=7))
    return ModelBundle(net, cfg, params, history, threshold=0.4125, background=rng.normal(size=(5, 7)))


def test_round_trip_is_bit_exact(tmp_path):
    b = _bundle(1)
    save_model(b, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    X = np.random.default_rng(2).normal(size=(100, 7)) * 3
    np.testing.assert_array_equal(back.predict(X), b.predict(X))
    for W0, W1 in zip(b.network.weights, back.network.weights):
        np.testing.assert_array_equal(W0, W1)
    assert back.threshold == b.threshold and back.history.best_epoch == 2
    np.testing.assert_array_equal(back.background, b.background)
    assert back.config == b.config


def test_tampered_shape_raises(tmp_path):
    doc = _bundle().to_dict()
    doc["layers"][1]["shape"] = [64, 65]
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(BundleError, match="layer 1"):
        load_model(tmp_path / "m.json")


def test_weight_count_mismatch_raises():
    doc = _bundle().to_dict()
    doc["layers"][0]["weights"] = doc["layers"][0]["weights"][:-1]
    with pytest.raises(BundleError, match="weights stored"):
        ModelBundle.from_dict(doc)


def test_unknown_version_fails_closed():
    doc = _bundle().to_dict()
    doc["version"] = 2
    with pytest.raises(BundleError, match="version"):
        ModelBundle.from_dict(doc)
    doc["version"], doc["format"] = 1, "something-else"
    with pytest.raises(BundleError, match="format"):
        ModelBundle.from_dict(doc)


def test_truncated_file_fails(tmp_path):
    save_model(_bundle(), tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    (tmp_path / "t.json").write_text(text[: len(text) // 2])
    with pytest.raises(BundleError, match="truncated"):
        load_model(tmp_path / "t.json")


def test_best_epoch_must_agree_with_history():
    doc = _bundle().to_dict()
    doc["best_epoch"] = 1
    with pytest.raises(BundleError, match="best_epoch"):
        ModelBundle.from_dict(doc)


def test_fingerprint_sensitive_to_values_and_labels():
    X = np.arange(14, dtype=float).reshape(2, 7)
    a = LabeledDataset(X, np.array(["Passed", "Failed"]))
    b = LabeledDataset(X, np.array(["Failed", "Passed"]))
    c = LabeledDataset(X + 1e-12, a.labels)
    assert len({dataset_fingerprint(a), dataset_fingerprint(b), dataset_fingerprint(c)}) == 3
    assert dataset_fingerprint(a) == dataset_fingerprint(LabeledDataset(X.copy(), a.labels.copy()))
