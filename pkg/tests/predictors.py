"""Row-independent toy predictors for the explanation tests."""

import numpy as np

from procqx.neural_net import Network, predict


def network_predictor(d, seed, hidden=(6, 5), dummy=()):
    """Small random sigmoid network; features listed in ``dummy`` are never read."""
    rng = np.random.default_rng(seed)
    sizes = [d, *hidden, 1]
    weights = [rng.normal(0, 1.0, size=(o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
    biases = [rng.normal(0, 0.5, size=o) for o in sizes[1:]]
    for j in dummy:
        weights[0][:, j] = 0.0
    net = Network(weights, biases)
    return lambda X: predict(net, np.atleast_2d(X))


def additive_predictor(w, c=0.0):
    w = np.asarray(w, dtype=float)
    return lambda X: np.atleast_2d(X) @ w + c


def analytic_predictor(d, seed, dummy=()):
    """Smooth nonlinear function with pairwise interactions."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    pairs = rng.normal(size=(d, d))
    for j in dummy:
        w[j] = 0.0
        pairs[j, :] = pairs[:, j] = 0.0

    def f(X):
        X = np.atleast_2d(X)
        return np.tanh(X @ w) + np.einsum("ni,ij,nj->n", X, pairs, X) / d + 0.1 * np.sin(X @ w)

    return f


def symmetric_predictor(d, seed):
    """Predictor invariant under swapping features 0 and 1."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)

    def f(X):
        X = np.atleast_2d(X)
        s, p = X[:, 0] + X[:, 1], X[:, 0] * X[:, 1]
        return np.tanh(0.7 * s + 0.3 * p + X[:, 2:] @ w[2:])

    return f


def symmetric_background(B):
    """Background closed under swapping columns 0 and 1."""
    swapped = B.copy()
    swapped[:, [0, 1]] = B[:, [1, 0]]
    return np.vstack([B, swapped])
