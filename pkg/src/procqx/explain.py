"""Model-agnostic local explanations: Shapley values, ICE and PDP curves.

A predictor is any deterministic callable mapping an (m, d) array of
feature rows to an (m,) array of scores. It must treat rows
independently; the bit-exact identities below rely on that.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .process_data import LabeledDataset

Predictor = Callable[[np.ndarray], np.ndarray]

MAX_EXACT_FEATURES = 15
DEFAULT_BACKGROUND_ROWS = 256
DEFAULT_GRID_POINTS = 30


@dataclass(frozen=True)
class ShapleyExplanation:
    instance: np.ndarray
    prediction: float
    base_value: float
    contributions: np.ndarray
    method: str = "exact"
    samples: Optional[int] = None
    seed: Optional[int] = None
    stderr: Optional[np.ndarray] = None

    @property
    def n_features(self) -> int:
        return self.contributions.shape[0]

    def efficiency_gap(self) -> float:
        return float(math.fsum(self.contributions) - (self.prediction - self.base_value))

    def to_dict(self, feature_names: Sequence[str]) -> dict:
        features = []
        for j, name in enumerate(feature_names):
            entry = {"name": name, "value": float(self.instance[j]), "phi": float(self.contributions[j])}
            if self.stderr is not None:
                entry["stderr"] = float(self.stderr[j])
            features.append(entry)
        d = {
            "method": self.method,
            "prediction": self.prediction,
            "base_value": self.base_value,
            "instance": [float(v) for v in self.instance],
            "features": features,
        }
        if self.method == "monte_carlo":
            d["samples"] = self.samples
            d["seed"] = self.seed
        return d


@dataclass(frozen=True)
class IceCurve:
    instance: np.ndarray
    feature_index: int
    grid: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True)
class PdpCurve:
    feature_index: int
    grid: np.ndarray
    mean_scores: np.ndarray
    ice_scores: np.ndarray  # (rows, grid points)


@dataclass(frozen=True)
class GlobalShapSummary:
    contributions: np.ndarray  # (n, d)
    values: np.ndarray  # (n, d) feature values of the explained instances
    importance: np.ndarray

    def dependence(self, j: int) -> List[tuple]:
        return list(zip(self.values[:, j].tolist(), self.contributions[:, j].tolist()))


def _score(predictor: Predictor, X: np.ndarray) -> np.ndarray:
    return np.asarray(predictor(X), dtype=float).reshape(-1)


def _prepare(instance, background):
    x = np.asarray(instance, dtype=float).reshape(-1)
    B = background.X if isinstance(background, LabeledDataset) else np.asarray(background, dtype=float)
    B = np.atleast_2d(B)
    if B.shape[0] == 0:
        raise ValueError("background set is empty")
    if B.shape[1] != x.shape[0]:
        raise ValueError(f"instance has {x.shape[0]} features, background has {B.shape[1]}")
    return x, B


def subsample_background(data, max_rows: int = DEFAULT_BACKGROUND_ROWS, seed: int = 0) -> np.ndarray:
    """At most ``max_rows`` rows, drawn without replacement and kept in order."""
    X = data.X if isinstance(data, LabeledDataset) else np.asarray(data, dtype=float)
    if X.shape[0] <= max_rows:
        return X.copy()
    idx = np.sort(np.random.default_rng(seed).choice(X.shape[0], size=max_rows, replace=False))
    return X[idx]


def coalition_values(predictor: Predictor, instance, background) -> np.ndarray:
    """v(S) for every subset S, indexed by bitmask (bit j set = feature j from the instance).

    v(S) is the mean score over background rows with the features in S
    replaced by the instance's values.
    """
    x, B = _prepare(instance, background)
    d = x.shape[0]
    if d > MAX_EXACT_FEATURES:
        raise ValueError(f"exact Shapley enumeration supports at most {MAX_EXACT_FEATURES} features, got {d}")
    masks = ((np.arange(2 ** d)[:, None] >> np.arange(d)) & 1).astype(bool)
    values = np.empty(2 ** d)
    for s, mask in enumerate(masks):
        Z = B.copy()
        Z[:, mask] = x[mask]
        values[s] = _score(predictor, Z).mean()
    return values


def exact_shapley(predictor: Predictor, instance, background) -> ShapleyExplanation:
    """Shapley values by full subset enumeration against a marginal background."""
    x, B = _prepare(instance, background)
    d = x.shape[0]
    v = coalition_values(predictor, x, B)
    sizes = np.array([bin(s).count("1") for s in range(2 ** d)])
    weight = np.array([math.factorial(k) * math.factorial(d - k - 1) / math.factorial(d) for k in range(d)])
    phi = np.zeros(d)
    for j in range(d):
        bit = 1 << j
        without = np.array([s for s in range(2 ** d) if not s & bit])
        phi[j] = math.fsum(weight[sizes[without]] * (v[without | bit] - v[without]))
    prediction = float(_score(predictor, x[None, :])[0])
    return ShapleyExplanation(x, prediction, float(v[0]), phi, method="exact")


def mc_shapley(predictor: Predictor, instance, background, samples: int = 1000, seed: int = 0) -> ShapleyExplanation:
    """Permutation-sampling Shapley estimate with per-feature standard errors.

    Each sample draws a feature order and one background row, then walks
    the order switching features from the background row to the instance;
    the score change at each switch is that feature's contribution.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    x, B = _prepare(instance, background)
    d = x.shape[0]
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(np.arange(d), (samples, 1)), axis=1)
    rows = rng.integers(0, B.shape[0], size=samples)

    # chain[s, k] = background row with the first k features of perms[s] taken from x
    chain = np.repeat(B[rows][:, None, :], d + 1, axis=1)
    taken = np.zeros((samples, d), dtype=bool)
    for k in range(1, d + 1):
        taken[np.arange(samples), perms[:, k - 1]] = True
        chain[:, k, :] = np.where(taken, x, chain[:, 0, :])
    scores = _score(predictor, chain.reshape(-1, d)).reshape(samples, d + 1)

    marginal = np.empty((samples, d))
    marginal[np.arange(samples)[:, None], perms] = scores[:, 1:] - scores[:, :-1]
    phi = marginal.mean(axis=0)
    stderr = marginal.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.zeros(d)
    prediction = float(_score(predictor, x[None, :])[0])
    base = float(_score(predictor, B).mean())
    return ShapleyExplanation(x, prediction, base, phi, method="monte_carlo", samples=samples, seed=seed, stderr=stderr)


def build_grid(data, feature_index: int, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """``points`` equally spaced values over the feature's observed range."""
    if points < 2:
        raise ValueError("a grid needs at least 2 points")
    X = data.X if isinstance(data, LabeledDataset) else np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("cannot build a grid from an empty dataset")
    lo, hi = float(X[:, feature_index].min()), float(X[:, feature_index].max())
    if lo == hi:
        warnings.warn(f"feature {feature_index} is constant; grid collapses to a single point", stacklevel=2)
        return np.array([lo])
    return np.linspace(lo, hi, points)


def with_observed(grid: np.ndarray, value: float) -> np.ndarray:
    """Grid with ``value`` inserted (if absent) so the curve passes through the instance."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid == value):
        return grid
    return np.sort(np.r_[grid, value])


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be nonempty and strictly increasing")
    return grid


def _ice_matrix(predictor: Predictor, X: np.ndarray, feature_index: int, grid: np.ndarray) -> np.ndarray:
    n, g = X.shape[0], grid.size
    Z = np.repeat(X, g, axis=0)
    Z[:, feature_index] = np.tile(grid, n)
    return _score(predictor, Z).reshape(n, g)


def ice_curve(predictor: Predictor, instance, feature_index: int, grid) -> IceCurve:
    """Scores of ``instance`` with one feature swept over ``grid``."""
    x = np.asarray(instance, dtype=float).reshape(-1)
    grid = _check_grid(grid)
    scores = _ice_matrix(predictor, x[None, :], feature_index, grid)[0]
    return IceCurve(x, feature_index, grid, scores)


def pdp_curve(predictor: Predictor, data, feature_index: int, grid) -> PdpCurve:
    """Partial dependence: the pointwise mean of every row's ICE curve."""
    X = data.X if isinstance(data, LabeledDataset) else np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("cannot compute partial dependence on an empty dataset")
    grid = _check_grid(grid)
    ice = _ice_matrix(predictor, X, feature_index, grid)
    return PdpCurve(feature_index, grid, ice.mean(axis=0), ice)


def shap_global_summary(explanations: Sequence[ShapleyExplanation]) -> GlobalShapSummary:
    """Mean absolute contribution per feature over many local explanations."""
    if not explanations:
        raise ValueError("no explanations to summarize")
    d = explanations[0].n_features
    if any(e.n_features != d for e in explanations):
        raise ValueError("explanations have different feature counts")
    phi = np.stack([e.contributions for e in explanations])
    values = np.stack([e.instance for e in explanations])
    return GlobalShapSummary(phi, values, np.abs(phi).mean(axis=0))
