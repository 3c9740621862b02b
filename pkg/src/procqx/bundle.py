"""Model bundle: network, config, standardizer and training metadata as one JSON file.

Floats are written with ``repr`` (shortest round-trip form), so a reloaded
bundle reproduces every weight bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .neural_net import Network, NetworkConfig, TrainingHistory, predict
from .process_data import FEATURE_NAMES, LabeledDataset, StandardizationParams, standardize

BUNDLE_FORMAT = "procqx-model"
BUNDLE_VERSION = 1


class BundleError(ValueError):
    """Raised when a model bundle is unreadable or inconsistent."""


def dataset_fingerprint(data: LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.X, dtype="<f8").tobytes())
    if data.labels is not None:
        h.update("\n".join(data.labels.tolist()).encode())
    return h.hexdigest()


@dataclass
class ModelBundle:
    network: Network
    config: NetworkConfig
    standardizer: StandardizationParams
    history: TrainingHistory
    threshold: float
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    split_ratios: Tuple[float, ...] = (0.6, 0.2, 0.2)
    split_seed: int = 0
    dataset_sha256: Optional[str] = None
    background: np.ndarray = field(default_factory=lambda: np.empty((0, len(FEATURE_NAMES))))

    def predictor(self):
        """Score raw (unstandardized) feature rows."""
        net, params = self.network, self.standardizer

        def score(X):
            return predict(net, standardize(params, np.atleast_2d(X)))

        return score

    def predict(self, data) -> np.ndarray:
        X = data.X if isinstance(data, LabeledDataset) else data
        return self.predictor()(X)

    def to_dict(self) -> dict:
        return {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "feature_names": list(self.feature_names),
            "config": self.config.to_dict(),
            "training_seed": self.config.seed,
            "layers": [
                {"shape": list(W.shape), "weights": W.ravel().tolist(), "biases": b.tolist()}
                for W, b in zip(self.network.weights, self.network.biases)
            ],
            "standardizer": self.standardizer.to_dict(),
            "threshold": self.threshold,
            "split": {"ratios": list(self.split_ratios), "seed": self.split_seed},
            "dataset_sha256": self.dataset_sha256,
            "best_epoch": self.history.best_epoch,
            "history": self.history.to_dict(),
            "background": self.background.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        if d.get("format") != BUNDLE_FORMAT:
            raise BundleError(f"not a model bundle (format={d.get('format')!r})")
        if d.get("version") != BUNDLE_VERSION:
            raise BundleError(f"unsupported bundle version {d.get('version')!r}; expected {BUNDLE_VERSION}")
        try:
            names = tuple(d["feature_names"])
            config = NetworkConfig.from_dict(d["config"])
            weights, biases = _read_layers(d["layers"], len(names))
            params = StandardizationParams.from_dict(d["standardizer"])
            history = TrainingHistory.from_dict(d["history"])
            background = np.asarray(d["background"], dtype=float).reshape(-1, len(names))
            bundle = cls(
                network=Network(weights, biases),
                config=config,
                standardizer=params,
                history=history,
                threshold=float(d["threshold"]),
                feature_names=names,
                split_ratios=tuple(float(r) for r in d["split"]["ratios"]),
                split_seed=int(d["split"]["seed"]),
                dataset_sha256=d.get("dataset_sha256"),
                background=background,
            )
        except BundleError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleError(f"invalid model bundle: {exc}") from None
        if params.mean.shape != (len(names),):
            raise BundleError("standardizer does not match the feature count")
        expected = [config.n_inputs, *config.hidden_sizes, 1]
        actual = [bundle.network.n_inputs] + [W.shape[0] for W in weights]
        if actual != expected:
            raise BundleError(f"layer widths {actual} do not match config {expected}")
        if d.get("best_epoch") != history.best_epoch:
            raise BundleError("best_epoch disagrees with the stored history")
        return bundle


def _read_layers(layers: list, n_inputs: int) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    weights, biases = [], []
    fan_in = n_inputs
    for i, layer in enumerate(layers):
        rows, cols = (int(v) for v in layer["shape"])
        flat = np.asarray(layer["weights"], dtype=float)
        b = np.asarray(layer["biases"], dtype=float)
        if cols != fan_in:
            raise BundleError(f"layer {i}: expects {cols} inputs but previous layer yields {fan_in}")
        if flat.shape != (rows * cols,):
            raise BundleError(f"layer {i}: shape {rows}x{cols} but {flat.size} weights stored")
        if b.shape != (rows,):
            raise BundleError(f"layer {i}: {b.size} biases for {rows} units")
        weights.append(flat.reshape(rows, cols))
        biases.append(b)
        fan_in = rows
    if not weights or weights[-1].shape[0] != 1:
        raise BundleError("final layer must have exactly one output unit")
    return weights, biases


def save_model(bundle: ModelBundle, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle.to_dict(), fh, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> ModelBundle:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path}: truncated or malformed JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise BundleError(f"{path}: bundle must be a JSON object")
    return ModelBundle.from_dict(doc)
