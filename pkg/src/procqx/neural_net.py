"""Deep feedforward binary classifier trained with ADADELTA.

Rectifier hidden layers with inverted dropout, a single sigmoid output,
mean binary cross-entropy, a per-unit cap on the squared norm of incoming
weights, and AUROC-driven early stopping on a validation split.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .evaluation import auroc_score
from .process_data import DataError, LabeledDataset

PROB_CLAMP = 1e-12


@dataclass
class NetworkConfig:
    hidden_sizes: List[int] = field(default_factory=lambda: [64, 64, 64, 64])
    input_dropout: float = 0.2
    hidden_dropout: List[float] = field(default_factory=lambda: [0.5, 0.5, 0.5, 0.5])
    max_epochs: int = 1000
    rho: float = 0.99
    epsilon: float = 1e-8
    max_w2: float = 100.0
    stopping_rounds: int = 5
    stopping_tolerance: float = 0.005
    minibatch_size: int = 32
    seed: int = 0
    n_inputs: int = 7

    def __post_init__(self):
        self.hidden_sizes = [int(h) for h in self.hidden_sizes]
        self.hidden_dropout = [float(p) for p in self.hidden_dropout]
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ValueError(f"invalid NetworkConfig.{name}: {why}")

        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            bad("hidden_sizes", "needs at least one layer of positive width")
        if len(self.hidden_dropout) != len(self.hidden_sizes):
            bad("hidden_dropout", "length must equal the number of hidden layers")
        if not 0 <= self.input_dropout < 1:
            bad("input_dropout", "must lie in [0, 1)")
        if any(not 0 <= p < 1 for p in self.hidden_dropout):
            bad("hidden_dropout", "ratios must lie in [0, 1)")
        if not 0 < self.rho < 1:
            bad("rho", "must lie in (0, 1)")
        if not self.epsilon > 0:
            bad("epsilon", "must be positive")
        if not self.max_w2 > 0:
            bad("max_w2", "must be positive")
        if self.max_epochs < 1:
            bad("max_epochs", "must be positive")
        if self.stopping_rounds < 0:
            bad("stopping_rounds", "must be nonnegative")
        if self.stopping_tolerance < 0:
            bad("stopping_tolerance", "must be nonnegative")
        if self.minibatch_size < 1:
            bad("minibatch_size", "must be positive")
        if self.n_inputs < 1:
            bad("n_inputs", "must be positive")

    def to_dict(self) -> dict:
        return {f.name: copy.copy(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"invalid NetworkConfig field(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class Network:
    """Weights ``W[l]`` of shape (units_out, units_in) and biases ``b[l]``."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @property
    def shapes(self) -> List[Tuple[int, int]]:
        return [tuple(W.shape) for W in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    def copy(self) -> "Network":
        return Network([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def params(self) -> List[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass
class AdadeltaState:
    accum_grad_sq: List[np.ndarray]
    accum_update_sq: List[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdadeltaState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


@dataclass
class TrainingRound:
    epoch: int
    valid_auroc: float
    train_loss: float


@dataclass
class TrainingHistory:
    rounds: List[TrainingRound] = field(default_factory=list)
    stopped_early: bool = False
    best_epoch: int = 0

    @property
    def aurocs(self) -> List[float]:
        return [r.valid_auroc for r in self.rounds]

    @property
    def best_auroc(self) -> float:
        return next(r.valid_auroc for r in self.rounds if r.epoch == self.best_epoch)

    def to_dict(self) -> dict:
        return {
            "stopped_early": self.stopped_early,
            "best_epoch": self.best_epoch,
            "rounds": [
                {"epoch": r.epoch, "valid_auroc": r.valid_auroc, "train_loss": r.train_loss}
                for r in self.rounds
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingHistory":
        return cls(
            [TrainingRound(int(r["epoch"]), float(r["valid_auroc"]), float(r["train_loss"])) for r in d["rounds"]],
            bool(d["stopped_early"]),
            int(d["best_epoch"]),
        )


# ---------------------------------------------------------------------------
# construction and forward pass


def init_network(config: NetworkConfig) -> Network:
    """Uniform adaptive init: U(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(config.seed)
    sizes = [config.n_inputs, *config.hidden_sizes, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases)


def _affine(h: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    # einsum keeps each row's arithmetic independent of batch size
    return np.einsum("ni,oi->no", h, W) + b


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def keep_probs(config: NetworkConfig) -> List[float]:
    return [1.0 - config.input_dropout] + [1.0 - p for p in config.hidden_dropout]


def sample_masks(config: NetworkConfig, net: Network, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Inverted-dropout masks: kept units carry 1/keep_prob, dropped units 0.

    One mask for the input layer and one per hidden layer.
    """
    widths = [net.n_inputs] + [W.shape[0] for W in net.weights[:-1]]
    masks = []
    for width, keep in zip(widths, keep_probs(config)):
        kept = rng.random((batch_size, width)) < keep
        masks.append(kept / keep)
    return masks


def _forward(net: Network, X: np.ndarray, masks: Optional[Sequence[np.ndarray]]):
    """Returns the list of layer inputs (post-mask), pre-activations, and scores."""
    inputs, pre = [], []
    h = X
    n_layers = len(net.weights)
    for layer, (W, b) in enumerate(zip(net.weights, net.biases)):
        if masks is not None:
            h = h * masks[layer]
        inputs.append(h)
        z = _affine(h, W, b)
        pre.append(z)
        h = np.maximum(z, 0.0) if layer < n_layers - 1 else z
    return inputs, pre, sigmoid(h[:, 0])


def forward(net: Network, X: np.ndarray, masks: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """Scores for a batch (or a single row). ``masks=None`` is inference mode."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != net.n_inputs:
        raise DataError(f"expected {net.n_inputs} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite input to forward")
    scores = _forward(net, X, masks)[2]
    return scores[0] if single else scores


def predict(net: Network, data) -> np.ndarray:
    """Inference-mode scores for every row, order preserved."""
    X = data.X if isinstance(data, LabeledDataset) else np.asarray(data, dtype=float)
    return forward(net, np.atleast_2d(X))


# ---------------------------------------------------------------------------
# loss and gradients


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def loss_and_gradients(
    net: Network, X: np.ndarray, y: np.ndarray, masks: Optional[Sequence[np.ndarray]] = None
) -> Tuple[float, List[np.ndarray]]:
    """Mean binary cross-entropy and its exact gradients.

    Gradients are returned in :meth:`Network.params` order
    (W1, b1, W2, b2, ...). Where the clamp on p is active the loss is flat
    in the output, so the gradient there is zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    inputs, pre, p = _forward(net, X, masks)
    loss = bce_loss(p, y)

    clamped = (p < PROB_CLAMP) | (p > 1.0 - PROB_CLAMP)
    delta = np.where(clamped, 0.0, (p - y) / n)[:, None]
    grads: List[np.ndarray] = [None] * (2 * len(net.weights))
    for layer in range(len(net.weights) - 1, -1, -1):
        grads[2 * layer] = delta.T @ inputs[layer]
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer == 0:
            break
        back = delta @ net.weights[layer]
        if masks is not None:
            back = back * masks[layer]
        delta = back * (pre[layer - 1] > 0)
    return loss, grads


# ---------------------------------------------------------------------------
# optimizer and constraint


def adadelta_step(
    state: AdadeltaState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], rho: float, epsilon: float
) -> List[np.ndarray]:
    """Apply one ADADELTA update to ``params`` in place and return the deltas."""
    deltas = []
    for p, g, eg2, ex2 in zip(params, grads, state.accum_grad_sq, state.accum_update_sq):
        eg2 *= rho
        eg2 += (1.0 - rho) * g * g
        dx = -np.sqrt(ex2 + epsilon) / np.sqrt(eg2 + epsilon) * g
        ex2 *= rho
        ex2 += (1.0 - rho) * dx * dx
        p += dx
        deltas.append(dx)
    return deltas


def clip_max_w2(net: Network, limit: float) -> None:
    """Rescale incoming weights of any unit whose squared sum exceeds ``limit``."""
    if not limit > 0:
        raise ValueError("max_w2 limit must be positive")
    for W in net.weights:
        s = np.einsum("oi,oi->o", W, W)
        over = s > limit
        if np.any(over):
            W[over] *= np.sqrt(limit / s[over])[:, None]


# ---------------------------------------------------------------------------
# early stopping and training


def moving_average_stop(aurocs: Sequence[float], rounds: int, tolerance: float) -> bool:
    """Whether training should stop after the latest scoring round.

    Looks at the last ``2 * rounds`` scores. The moving average (window
    ``rounds``) over the oldest half is the reference; training stops when
    none of the ``rounds`` later moving averages beats it by more than the
    relative ``tolerance``.
    """
    if rounds <= 0 or len(aurocs) < 2 * rounds:
        return False
    tail = np.asarray(aurocs[-2 * rounds:], dtype=float)
    averages = [tail[i:i + rounds].mean() for i in range(rounds + 1)]
    reference, best_new = averages[0], max(averages[1:])
    if reference <= 0:
        return False
    return not best_new / reference > 1.0 + tolerance


ScoreFn = Callable[[Network, int], float]


def train(
    config: NetworkConfig,
    train_set: LabeledDataset,
    valid_set: LabeledDataset,
    score_fn: Optional[ScoreFn] = None,
    log: Optional[Callable[[TrainingRound], None]] = None,
) -> Tuple[Network, TrainingHistory]:
    """Minibatch ADADELTA training with one validation scoring round per epoch.

    ``score_fn(net, epoch)`` overrides the validation AUROC, which lets
    tests script the early-stopping trace. Returns the snapshot of the
    best-scoring round (the earliest one on ties).
    """
    if train_set.X.shape[1] != config.n_inputs:
        raise DataError(f"config expects {config.n_inputs} inputs, training data has {train_set.X.shape[1]}")
    X, y = train_set.X, train_set.y
    if score_fn is None:
        yv = valid_set.y
        if yv.min() == yv.max():
            raise DataError("validation set must contain both classes")

        def score_fn(net, epoch):
            return auroc_score(predict(net, valid_set), yv)

    net = init_network(config)
    state = AdadeltaState.zeros_like(net.params())
    shuffle_seq, mask_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    mask_rng = np.random.default_rng(mask_seq)

    history = TrainingHistory()
    best_score, best_net = -math.inf, net.copy()
    bs = config.minibatch_size
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(X.shape[0])
        losses = []
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            masks = sample_masks(config, net, idx.size, mask_rng)
            loss, grads = loss_and_gradients(net, X[idx], y[idx], masks)
            adadelta_step(state, net.params(), grads, config.rho, config.epsilon)
            clip_max_w2(net, config.max_w2)
            losses.append(loss * idx.size)
        score = float(score_fn(net, epoch))
        rnd = TrainingRound(epoch, score, math.fsum(losses) / X.shape[0])
        history.rounds.append(rnd)
        if log is not None:
            log(rnd)
        if score > best_score:
            best_score, best_net = score, net.copy()
            history.best_epoch = epoch
        if moving_average_stop(history.aurocs, config.stopping_rounds, config.stopping_tolerance):
            history.stopped_early = True
            break
    return best_net, history
