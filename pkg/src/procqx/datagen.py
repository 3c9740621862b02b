"""Semi-artificial data: Gaussian RBF kernels fitted per class, then sampled.

Seed rows are standardized, clustered per class with k-means, and every
cluster becomes a diagonal Gaussian kernel weighted by its share of the
class. Sampling picks a class, then a kernel, then draws each feature
independently before mapping back to the original units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Dict, List, Tuple

import numpy as np

from .process_data import (
    FEATURE_NAMES,
    LABELS,
    CaseRecord,
    DataError,
    Event,
    EventLog,
    LabeledDataset,
    StandardizationParams,
    destandardize,
    fit_standardizer,
    standardize,
)

WIDTH_FLOOR = 0.05
KMEANS_RESTARTS = 20
KMEANS_MAX_ITER = 100
DEFAULT_ROWS = 5000
DEFAULT_KERNELS_PER_CLASS = 5
FORMAT_VERSION = "procqx-generator/1"


@dataclass(frozen=True)
class RbfKernel:
    center: np.ndarray
    width: np.ndarray
    class_label: str
    weight: float

    def __post_init__(self):
        if not np.all(np.asarray(self.width) > 0):
            raise DataError("kernel widths must be positive")
        if not self.weight > 0:
            raise DataError("kernel weight must be positive")


@dataclass(frozen=True)
class RbfGenerator:
    kernels: Tuple[RbfKernel, ...]
    class_priors: Dict[str, float]
    feature_bounds: np.ndarray  # (n_features, 2): min, max
    standardizer: StandardizationParams
    feature_names: Tuple[str, ...] = FEATURE_NAMES

    def kernels_of(self, label: str) -> List[RbfKernel]:
        return [k for k in self.kernels if k.class_label == label]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "feature_names": list(self.feature_names),
            "class_priors": {k: float(v) for k, v in self.class_priors.items()},
            "feature_bounds": [[float(lo), float(hi)] for lo, hi in self.feature_bounds],
            "standardizer": self.standardizer.to_dict(),
            "kernels": [
                {
                    "class": k.class_label,
                    "weight": float(k.weight),
                    "center": [float(v) for v in k.center],
                    "width": [float(v) for v in k.width],
                }
                for k in self.kernels
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RbfGenerator":
        if d.get("format") != FORMAT_VERSION:
            raise DataError(f"unsupported generator format {d.get('format')!r}")
        try:
            kernels = tuple(
                RbfKernel(np.asarray(k["center"], float), np.asarray(k["width"], float), k["class"], float(k["weight"]))
                for k in d["kernels"]
            )
            gen = cls(
                kernels=kernels,
                class_priors={k: float(v) for k, v in d["class_priors"].items()},
                feature_bounds=np.asarray(d["feature_bounds"], float),
                standardizer=StandardizationParams.from_dict(d["standardizer"]),
                feature_names=tuple(d["feature_names"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid generator document: {exc}") from None
        _check_generator(gen)
        return gen


def _check_generator(gen: RbfGenerator) -> None:
    d = len(gen.feature_names)
    if gen.feature_bounds.shape != (d, 2):
        raise DataError("feature_bounds shape does not match feature count")
    if abs(sum(gen.class_priors.values()) - 1.0) > 1e-9:
        raise DataError("class priors must sum to 1")
    for label in gen.class_priors:
        ks = gen.kernels_of(label)
        if not ks:
            raise DataError(f"class {label} has no kernels")
        if abs(sum(k.weight for k in ks) - 1.0) > 1e-9:
            raise DataError(f"kernel weights of class {label} must sum to 1")
        if any(k.center.shape != (d,) or k.width.shape != (d,) for k in ks):
            raise DataError("kernel dimensionality does not match feature count")


def save_generator(gen: RbfGenerator, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(gen.to_dict(), fh, indent=2)
        fh.write("\n")


def load_generator(path) -> RbfGenerator:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON ({exc})") from None
    return RbfGenerator.from_dict(doc)


def kmeans(
    Z: np.ndarray,
    k: int,
    rng: np.random.Generator,
    restarts: int = KMEANS_RESTARTS,
    max_iter: int = KMEANS_MAX_ITER,
) -> Tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with ``restarts`` random initializations.

    Each restart seeds the centers with ``k`` distinct rows of ``Z``. The run
    with the lowest within-cluster sum of squares wins.

    Returns
    -------
    centers : (k, d) array
    assignment : (n,) array of cluster indices
    """
    n = Z.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"cannot form {k} clusters from {n} rows")
    best = None
    for _ in range(restarts):
        centers = Z[rng.choice(n, size=k, replace=False)].copy()
        assign = np.full(n, -1)
        for _ in range(max_iter):
            d2 = ((Z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_assign = d2.argmin(axis=1)
            for c in range(k):
                if not np.any(new_assign == c):
                    # re-seed an emptied cluster on the worst-served row
                    far = int(d2[np.arange(n), new_assign].argmax())
                    new_assign[far] = c
            if np.array_equal(new_assign, assign):
                break
            assign = new_assign
            centers = np.stack([Z[assign == c].mean(axis=0) for c in range(k)])
        inertia = float(((Z - centers[assign]) ** 2).sum())
        if best is None or inertia < best[0]:
            best = (inertia, centers, assign)
    return best[1], best[2]


def fit_generator(seed_data: LabeledDataset, kernels_per_class: int = DEFAULT_KERNELS_PER_CLASS, seed: int = 0) -> RbfGenerator:
    """Fit ``kernels_per_class`` Gaussian kernels to every class of ``seed_data``."""
    if not seed_data.is_labeled:
        raise DataError("fit_generator needs labeled seed data")
    if kernels_per_class < 1:
        raise DataError("kernels_per_class must be a positive integer")
    params = fit_standardizer(seed_data)
    Z = standardize(params, seed_data.X)
    rng = np.random.default_rng(seed)
    n = len(seed_data)

    kernels: List[RbfKernel] = []
    priors: Dict[str, float] = {}
    for label in LABELS:
        mask = seed_data.labels == label
        count = int(mask.sum())
        if count == 0:
            continue
        if count < kernels_per_class:
            raise DataError(f"class {label} has {count} rows, fewer than kernels_per_class={kernels_per_class}")
        priors[label] = count / n
        Zc = Z[mask]
        centers, assign = kmeans(Zc, kernels_per_class, rng)
        for c in range(kernels_per_class):
            members = Zc[assign == c]
            width = np.maximum(members.std(axis=0), WIDTH_FLOOR)
            kernels.append(RbfKernel(centers[c], width, label, members.shape[0] / count))

    bounds = np.stack([seed_data.X.min(axis=0), seed_data.X.max(axis=0)], axis=1)
    return RbfGenerator(tuple(kernels), priors, bounds, params, seed_data.feature_names)


def sample_dataset(gen: RbfGenerator, n: int = DEFAULT_ROWS, seed: int = 0) -> LabeledDataset:
    """Draw ``n`` labeled rows from the fitted kernels."""
    if n < 1:
        raise DataError("n must be at least 1")
    rng = np.random.default_rng(seed)
    classes = list(gen.class_priors)
    priors = np.array([gen.class_priors[c] for c in classes])
    cls_idx = rng.choice(len(classes), size=n, p=priors / priors.sum())

    d = len(gen.feature_names)
    Z = np.empty((n, d))
    for ci, label in enumerate(classes):
        rows = np.flatnonzero(cls_idx == ci)
        if rows.size == 0:
            continue
        ks = gen.kernels_of(label)
        w = np.array([k.weight for k in ks])
        pick = rng.choice(len(ks), size=rows.size, p=w / w.sum())
        centers = np.stack([k.center for k in ks])[pick]
        widths = np.stack([k.width for k in ks])[pick]
        Z[rows] = centers + widths * rng.standard_normal((rows.size, d))

    X = destandardize(gen.standardizer, Z)
    X = np.clip(X, gen.feature_bounds[:, 0], gen.feature_bounds[:, 1])
    if gen.feature_names and gen.feature_names[0] == "total_process_steps":
        lo, hi = max(1.0, math.ceil(gen.feature_bounds[0, 0])), math.floor(gen.feature_bounds[0, 1])
        steps = np.maximum(np.rint(X[:, 0]), 1.0)
        X[:, 0] = np.clip(steps, lo, hi) if lo <= hi else steps
    labels = np.array(classes)[cls_idx]
    return LabeledDataset(X, labels, gen.feature_names)


# ---------------------------------------------------------------------------
# built-in seed log

ACTIVITIES = ("Sawing", "Turning", "Milling", "Drilling", "Grinding", "Heat treatment", "Eroding", "Assembly")


def quality_margin(features: np.ndarray) -> np.ndarray:
    """Deterministic pass/fail margin of the simulator; positive means Passed.

    High OEE and productivity help, long steps hurt (sharply beyond ~2000 s),
    generous setup time helps slightly, many steps hurt slightly.
    """
    f = np.atleast_2d(features)
    steps, dur, _, setup, _, oee, prod = f.T
    return (
        6.0 * (oee - 0.65)
        + 4.0 * (prod - 0.62)
        - 0.4 * (dur - 2000.0) / 1000.0
        - 1.6 * np.maximum(dur - 2000.0, 0.0) / 1000.0
        + 0.3 * (setup - 1800.0) / 1800.0
        - 0.04 * (steps - 8.0)
    )


def simulate_event_log(n_cases: int = 600, seed: int = 0) -> EventLog:
    """Synthetic MES log whose labels follow :func:`quality_margin` exactly.

    The classes are separable by construction, which gives the RBF generator
    well-defined clusters to learn from.
    """
    rng = np.random.default_rng(seed)
    t0 = datetime(2021, 3, 1, 6, 0, tzinfo=timezone.utc)
    log = EventLog()
    for i in range(n_cases):
        cid = f"C{i + 1:05d}"
        n_steps = int(rng.integers(3, 15))
        step_mean = float(rng.uniform(800.0, 3400.0))
        power_kw = float(rng.uniform(4.0, 22.0))
        durations = step_mean * rng.lognormal(0.0, 0.25, size=n_steps)
        start = t0 + timedelta(hours=8 * i)
        events = []
        for k, dur in enumerate(durations):
            dur = round(float(dur), 1)
            events.append(Event(cid, ACTIVITIES[int(rng.integers(len(ACTIVITIES)))], start, dur,
                                round(dur / 3600.0 * power_kw, 4)))
            start = start + timedelta(seconds=int(dur) + int(rng.integers(60, 900)))
        setup = round(float(rng.uniform(300.0, 3600.0)), 1)
        production = round(float(sum(e.duration_s for e in events) * rng.uniform(0.9, 1.25)), 1)
        oee = round(float(rng.uniform(0.3, 0.98)), 3)
        prod = round(float(rng.uniform(0.35, 0.95)), 3)
        avg = sum(e.duration_s for e in events) / n_steps
        margin = quality_margin(np.array([n_steps, avg, 0.0, setup, production, oee, prod]))[0]
        label = "Passed" if margin > 0 else "Failed"
        log.cases[cid] = (CaseRecord(cid, setup, production, oee, prod, label), events)
    return log
