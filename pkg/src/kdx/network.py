"""Fully connected ReLU classifier trained with mini-batch Adam.

The trained model exposes per-layer pre-activations so each input can be
mapped to its activation signature (one bit per hidden node, 1 iff the
node input is non-negative). The output layer is softmax and carries no
activation bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InvalidInputError, TrainingDivergedError
from .signatures import NET, MembershipSignature


@dataclass
class NetConfig:
    hidden_widths: tuple[int, ...] = (1000, 1000, 1000, 1000)
    learning_rate: float = 3e-4
    epochs: int = 200
    batch_size: int = 32
    plateau_patience: int = 20  # stop after this many epochs without loss improvement
    plateau_tol: float = 1e-6

    @classmethod
    def desk(cls, hidden_widths: tuple[int, ...] = (20, 20)) -> "NetConfig":
        """Small preset for tests and quick experiments."""
        return cls(hidden_widths=hidden_widths)


@dataclass
class ReluNetModel:
    """Weight matrices (in, out) and biases per layer; last layer is softmax."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    class_count: int
    seed: int = 0
    config: NetConfig = field(default_factory=NetConfig)

    @property
    def feature_count(self) -> int:
        return self.weights[0].shape[0]

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    def hidden_preactivations(self, X: np.ndarray) -> list[np.ndarray]:
        X = _check_points(X, self.feature_count)
        pres = []
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ W + b
            pres.append(z)
            h = np.maximum(z, 0.0)
        return pres

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = _check_points(X, self.feature_count)
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.logits(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)

    def signature(self, x: np.ndarray) -> MembershipSignature:
        return net_signature(self, x)

    def signatures(self, X: np.ndarray) -> list[MembershipSignature]:
        return net_signatures(self, X)


def _check_points(X, d):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != d:
        raise InvalidInputError(f"expected points of dimension {d}, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise InvalidInputError("points contain non-finite values")
    return X


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _init_params(rng, layer_sizes):
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def training_loss(model: ReluNetModel, data: Dataset) -> float:
    """Mean cross-entropy of the model on a dataset."""
    logits = model.logits(data.features)
    logp = logits - logits.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(data.sample_count), data.labels].mean())


def train_relu_net(data: Dataset, config: NetConfig | None = None, seed: int = 0) -> ReluNetModel:
    """Fit the network with Adam on cross-entropy; deterministic given seed.

    epochs = 0 returns the freshly initialized network untouched. A
    non-finite epoch loss or parameter raises TrainingDivergedError
    naming the offending epoch (1-based).
    """
    config = config or NetConfig()
    if len(config.hidden_widths) < 1:
        raise InvalidInputError("at least one hidden layer is required")
    if any(w < 1 for w in config.hidden_widths):
        raise InvalidInputError("hidden layer widths must be >= 1")
    if config.epochs < 0 or config.batch_size < 1:
        raise InvalidInputError("epochs must be >= 0 and batch_size >= 1")

    rng = np.random.default_rng(seed)
    sizes = (data.feature_count, *config.hidden_widths, data.class_count)
    weights, biases = _init_params(rng, sizes)
    model = ReluNetModel(weights, biases, data.class_count, seed=seed, config=config)
    if config.epochs == 0:
        return model

    X, y = data.features, data.labels
    n = data.sample_count
    onehot = np.eye(data.class_count)[y]

    beta1, beta2, eps = 0.9, 0.999, 1e-8
    params = weights + biases
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    step = 0
    best = np.inf
    stall = 0

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = perm[start : start + config.batch_size]
            xb, tb = X[batch], onehot[batch]
            b = batch.shape[0]

            # forward
            activations = [xb]
            h = xb
            for W, bias in zip(weights[:-1], biases[:-1]):
                h = np.maximum(h @ W + bias, 0.0)
                activations.append(h)
            logits = h @ weights[-1] + biases[-1]
            shifted = logits - logits.max(axis=1, keepdims=True)
            logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            probs = np.exp(shifted - logz)
            loss_sum += float(-(shifted - logz)[tb.astype(bool)].sum())

            # backward
            delta = (probs - tb) / b
            grads_w = [None] * len(weights)
            grads_b = [None] * len(biases)
            for layer in range(len(weights) - 1, -1, -1):
                grads_w[layer] = activations[layer].T @ delta
                grads_b[layer] = delta.sum(axis=0)
                if layer > 0:
                    delta = (delta @ weights[layer].T) * (activations[layer] > 0)

            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for p, g, m_s, v_s in zip(params, grads_w + grads_b, m_state, v_state):
                m_s += (1.0 - beta1) * (g - m_s)
                v_s += (1.0 - beta2) * (g * g - v_s)
                p -= config.learning_rate * (m_s / corr1) / (np.sqrt(v_s / corr2) + eps)

        epoch_loss = loss_sum / n
        if not np.isfinite(epoch_loss) or any(not np.isfinite(p).all() for p in params):
            raise TrainingDivergedError(epoch)
        if epoch_loss < best - config.plateau_tol:
            best = epoch_loss
            stall = 0
        else:
            stall += 1
            if stall >= config.plateau_patience:
                break

    return model


def net_signature(model: ReluNetModel, x: np.ndarray) -> MembershipSignature:
    """Activation bits of a single point, one vector per hidden layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("x must be a single point")
    pres = model.hidden_preactivations(x[None, :])
    bits = tuple((z[0] >= 0.0).astype(np.uint8) for z in pres)
    return MembershipSignature(kind=NET, net_activations=bits)


def net_signatures(model: ReluNetModel, X: np.ndarray) -> list[MembershipSignature]:
    pres = model.hidden_preactivations(X)
    layers = [(z >= 0.0).astype(np.uint8) for z in pres]
    return [
        MembershipSignature(kind=NET, net_activations=tuple(layer[i] for layer in layers))
        for i in range(X.shape[0])
    ]
