"""Multilayer perceptron forecaster trained by online backpropagation.

One network maps a pattern (recent deltas, scaled covariates, hour one-hot)
to the whole future window of Z deltas at once; there is no recursive
feeding of predictions. Training is strictly online: patterns are visited
in a fresh random order every epoch and every parameter moves immediately
after each pattern by

    step = -learning_rate * dE/dw + momentum * previous_step

where E is the half mean squared error of the window plus an L2 penalty
(weight_decay / 2) * sum(w^2) over connection weights only - biases are
exempt from the penalty. Hidden layers squash with tanh or the logistic
function; the output layer is linear.

Model selection happens against a validation pattern set: after every epoch
the network forecasts the validation windows, the deltas are rebuilt into
absolute temperatures, and the mean absolute error in degrees C decides
the best epoch and early stopping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import ConfigError
from .preprocess import PatternSet, invert_difference

ACTIVATIONS = ("tanh", "logistic")


def _act(name: str, a: np.ndarray) -> np.ndarray:
    return np.tanh(a) if name == "tanh" else expit(a)


def _act_prime_from_output(name: str, y: np.ndarray) -> np.ndarray:
    # derivatives written in terms of the activation output
    return 1.0 - y * y if name == "tanh" else y * (1.0 - y)


@dataclass(frozen=True)
class MlpConfig:
    """Architecture and training hyperparameters for one network."""

    n_inputs: int
    hidden: tuple[int, ...]
    n_outputs: int
    activations: tuple[str, ...]
    learning_rate: float = 0.005
    momentum: float = 0.001
    weight_decay: float = 1e-6
    epochs: int = 2000
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise ConfigError("layer sizes must be positive")
        if not 1 <= len(self.hidden) <= 2:
            raise ConfigError(f"one or two hidden layers supported, got {len(self.hidden)}")
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden layer sizes must be positive")
        if len(self.activations) != len(self.hidden):
            raise ConfigError("need exactly one activation per hidden layer")
        bad = [a for a in self.activations if a not in ACTIVATIONS]
        if bad:
            raise ConfigError(f"unknown activations {bad}, expected {ACTIVATIONS}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.n_inputs, *self.hidden, self.n_outputs)


class Mlp:
    """Parameter container: per-layer weights, biases and momentum buffers."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], activations: tuple[str, ...]):
        self.weights = weights
        self.biases = biases
        self.activations = activations  # hidden-layer activations; output is linear
        self.vel_w = [np.zeros_like(w) for w in weights]
        self.vel_b = [np.zeros_like(b) for b in biases]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def snapshot(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def restore(self, snap: tuple[list[np.ndarray], list[np.ndarray]]) -> None:
        self.weights = [w.copy() for w in snap[0]]
        self.biases = [b.copy() for b in snap[1]]


def init_mlp(config: MlpConfig) -> Mlp:
    """Fresh network: weights uniform in +/- sqrt(6 / (fan_in + fan_out)),
    biases zero. The draw is fully determined by config.seed."""
    rng = np.random.default_rng([config.seed, 0])
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        r = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases, config.activations)


def forward(net: Mlp, x) -> np.ndarray:
    """Network output for one pattern (1-D) or a batch (2-D)."""
    h = np.asarray(x, dtype=float)
    last = net.n_layers - 1
    for layer in range(net.n_layers):
        a = h @ net.weights[layer].T + net.biases[layer]
        h = a if layer == last else _act(net.activations[layer], a)
    return h


def loss(net: Mlp, output, target, weight_decay: float) -> float:
    """Half mean squared window error plus the connection-weight penalty."""
    o = np.asarray(output, dtype=float)
    t = np.asarray(target, dtype=float)
    data = 0.5 * float(np.mean((o - t) ** 2))
    penalty = 0.5 * weight_decay * sum(float(np.sum(w * w)) for w in net.weights)
    return data + penalty


def _backprop(net: Mlp, x: np.ndarray, target: np.ndarray, weight_decay: float):
    """Gradients of the per-pattern loss; returns (gw, gb, data_loss)."""
    hs = [x]
    last = net.n_layers - 1
    for layer in range(net.n_layers):
        a = net.weights[layer] @ hs[-1] + net.biases[layer]
        hs.append(a if layer == last else _act(net.activations[layer], a))
    out = hs[-1]
    z = out.shape[0]
    diff = out - target
    data_loss = 0.5 * float(diff @ diff) / z

    gw: list[np.ndarray | None] = [None] * net.n_layers
    gb: list[np.ndarray | None] = [None] * net.n_layers
    delta = diff / z
    for layer in range(last, -1, -1):
        gw[layer] = np.outer(delta, hs[layer]) + weight_decay * net.weights[layer]
        gb[layer] = delta
        if layer > 0:
            back = net.weights[layer].T @ delta
            delta = back * _act_prime_from_output(net.activations[layer - 1], hs[layer])
    return gw, gb, data_loss


def gradient(net: Mlp, x, target, weight_decay: float):
    """Exact per-pattern gradients, decay included (biases decay-free)."""
    gw, gb, _ = _backprop(
        net, np.asarray(x, dtype=float), np.asarray(target, dtype=float), weight_decay
    )
    return gw, gb


def apply_update(net: Mlp, gw, gb, learning_rate: float, momentum: float) -> None:
    """One online step: step = -lr * grad + momentum * previous step."""
    for layer in range(net.n_layers):
        vw = net.vel_w[layer]
        vw *= momentum
        vw -= learning_rate * gw[layer]
        net.weights[layer] += vw
        vb = net.vel_b[layer]
        vb *= momentum
        vb -= learning_rate * gb[layer]
        net.biases[layer] += vb


@dataclass
class TrainReport:
    """Per-epoch history and how training ended.

    train_loss holds the mean per-pattern data term of each epoch plus the
    weight penalty at the epoch's end; val_mae holds the validation mean
    absolute error in degrees C (empty when no validation set was given).
    stopping_reason is one of "max_epochs", "patience", "diverged".
    """

    train_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopping_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def validation_mae(net: Mlp, patterns: PatternSet) -> float:
    """Mean absolute error of rebuilt absolute forecasts, in degrees C."""
    preds = forward(net, patterns.inputs)
    abs_preds = invert_difference(preds, patterns.anchors)
    return float(np.mean(np.abs(abs_preds - patterns.absolute_targets())))


def train(
    net: Mlp,
    train_set: PatternSet,
    val_set: PatternSet | None,
    config: MlpConfig,
) -> tuple[Mlp, TrainReport]:
    """Online backpropagation with early stopping on validation MAE.

    Patterns are visited in a seeded random permutation each epoch and the
    update is applied immediately after each one. The network snapshot with
    the lowest validation MAE wins; training stops after config.patience
    epochs without improvement (patience 0 stops at the first one), at the
    epoch budget, or on divergence. The returned network is the passed one
    restored to its best snapshot.
    """
    if train_set.inputs.shape[1] != config.n_inputs:
        raise ConfigError(
            f"pattern inputs have width {train_set.inputs.shape[1]}, config says {config.n_inputs}"
        )
    if train_set.targets.shape[1] != config.n_outputs:
        raise ConfigError(
            f"pattern targets have width {train_set.targets.shape[1]}, config says {config.n_outputs}"
        )
    rng = np.random.default_rng([config.seed, 1])
    inputs, targets = train_set.inputs, train_set.targets
    n = len(train_set)
    report = TrainReport()
    best_score = math.inf
    best_snap = net.snapshot()
    report.best_epoch = -1
    since_best = 0

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        diverged = False
        with np.errstate(over="ignore", invalid="ignore"):
            for idx in order:
                gw, gb, data_loss = _backprop(net, inputs[idx], targets[idx], config.weight_decay)
                if not math.isfinite(data_loss):
                    diverged = True
                    break
                total += data_loss
                apply_update(net, gw, gb, config.learning_rate, config.momentum)
        if diverged:
            report.stopping_reason = "diverged"
            break
        penalty = 0.5 * config.weight_decay * sum(float(np.sum(w * w)) for w in net.weights)
        epoch_loss = total / n + penalty
        report.train_loss.append(epoch_loss)
        if not math.isfinite(epoch_loss):
            report.stopping_reason = "diverged"
            break

        score = validation_mae(net, val_set) if val_set is not None else epoch_loss
        if val_set is not None:
            report.val_mae.append(score)
        if score < best_score:
            best_score = score
            best_snap = net.snapshot()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                report.stopping_reason = "patience"
                break
    if not report.stopping_reason:
        report.stopping_reason = "max_epochs"
    net.restore(best_snap)
    return net, report


def predict_window(net: Mlp, x, anchor: float) -> np.ndarray:
    """Absolute Z-step forecast for one pattern: forward then rebuild."""
    return invert_difference(forward(net, x), float(anchor))


def parse_hidden_layout(text: str) -> tuple[tuple[int, ...], tuple[str, ...]]:
    """Parse layouts like "24t-16t" or "16l-8l" into sizes and activations.

    The trailing letter picks the activation: t for tanh, l for logistic.
    """
    sizes, acts = [], []
    for part in text.split("-"):
        part = part.strip()
        if not part or part[-1] not in ("t", "l"):
            raise ConfigError(f"bad hidden layout {text!r}: each layer needs a size and t/l suffix")
        try:
            sizes.append(int(part[:-1]))
        except ValueError as exc:
            raise ConfigError(f"bad hidden layout {text!r}: {part!r} has no integer size") from exc
        acts.append("tanh" if part[-1] == "t" else "logistic")
    return tuple(sizes), tuple(acts)


def format_hidden_layout(hidden: Sequence[int], activations: Sequence[str]) -> str:
    return "-".join(f"{h}{'t' if a == 'tanh' else 'l'}" for h, a in zip(hidden, activations))


class MlpForecaster(BaseEstimator):
    """Estimator-style front door for the network.

    Hyperparameters mirror MlpConfig; hidden can be a tuple of sizes with
    activation naming each layer's squashing ("tanh"/"logistic", or one
    name for all), or the whole architecture can come as a compact layout
    string via hidden="24t-16t" (activation is then ignored).
    """

    def __init__(
        self,
        hidden=(8,),
        activation="tanh",
        learning_rate: float = 0.005,
        momentum: float = 0.001,
        weight_decay: float = 1e-6,
        epochs: int = 2000,
        patience: int = 50,
        seed: int = 0,
    ):
        self.hidden = hidden
        self.activation = activation
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.patience = patience
        self.seed = seed

    def _resolve_architecture(self) -> tuple[tuple[int, ...], tuple[str, ...]]:
        if isinstance(self.hidden, str):
            return parse_hidden_layout(self.hidden)
        hidden = tuple(int(h) for h in self.hidden)
        if isinstance(self.activation, str):
            acts = (self.activation,) * len(hidden)
        else:
            acts = tuple(self.activation)
        return hidden, acts

    def fit(self, patterns: PatternSet, validation: PatternSet | None = None):
        hidden, acts = self._resolve_architecture()
        config = MlpConfig(
            n_inputs=patterns.inputs.shape[1],
            hidden=hidden,
            n_outputs=patterns.targets.shape[1],
            activations=acts,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
        )
        net = init_mlp(config)
        self.net_, self.report_ = train(net, patterns, validation, config)
        self.config_ = config
        return self

    def _require_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("this MlpForecaster is not fitted yet; call fit first")

    def predict(self, X) -> np.ndarray:
        """Delta-space forecasts for a matrix of patterns."""
        self._require_fitted()
        return forward(self.net_, np.asarray(X, dtype=float))

    def predict_absolute(self, patterns: PatternSet) -> np.ndarray:
        """Absolute-degree forecasts for a whole pattern set, shape (n, Z)."""
        self._require_fitted()
        return invert_difference(self.predict(patterns.inputs), patterns.anchors)

    def predict_window(self, x, anchor: float) -> np.ndarray:
        self._require_fitted()
        return predict_window(self.net_, x, anchor)

    def validation_mae(self, patterns: PatternSet) -> float:
        self._require_fitted()
        return validation_mae(self.net_, patterns)
