"""Three-hidden-layer sigmoid network with a softmax head.

Architecture p -> tau -> tau -> tau -> K, trained on cross-entropy by
mini-batch gradient descent with momentum.  The width tau is searched over
1..100 by validation accuracy (configurable subset for small runs).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .features import FeatureMatrix
from .rng import derive_rng

HIDDEN_LAYERS = 3


@dataclass(frozen=True)
class MlpConfig:
    tau: int
    epochs: int = 300
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("invalid epochs/batch_size")


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: MlpConfig

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def init_model(n_features: int, n_classes: int, cfg: MlpConfig) -> MlpModel:
    """Glorot-uniform weights, zero biases, drawn from the config seed."""
    rng = derive_rng(cfg.seed, "mlp-init")
    sizes = [n_features] + [cfg.tau] * HIDDEN_LAYERS + [n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases, config=cfg)


def _forward(model: MlpModel, x: np.ndarray) -> list[np.ndarray]:
    activations = [np.asarray(x, dtype=np.float64)]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        activations.append(_sigmoid(activations[-1] @ w + b))
    activations.append(activations[-1] @ model.weights[-1] + model.biases[-1])
    return activations


def predict_proba(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return softmax(_forward(model, x)[-1])


def mlp_predict(model: MlpModel, x: FeatureMatrix | np.ndarray) -> np.ndarray:
    data = x.x if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=np.float64)
    if data.shape[1] != model.weights[0].shape[0]:
        raise ValueError("feature dimension does not match the trained model")
    return np.argmax(_forward(model, data)[-1], axis=1)


def loss_and_gradients(model: MlpModel, x: np.ndarray,
                       y: np.ndarray) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy on a batch and its exact parameter gradients."""
    y = np.asarray(y, dtype=int)
    activations = _forward(model, x)
    logits = activations[-1]
    n = len(y)
    lse = logits.max(axis=1)
    lse = lse + np.log(np.exp(logits - lse[:, None]).sum(axis=1))
    loss = float(np.mean(lse - logits[np.arange(n), y]))

    delta = softmax(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w: list[np.ndarray] = [None] * len(model.weights)
    grads_b: list[np.ndarray] = [None] * len(model.biases)
    for layer in reversed(range(len(model.weights))):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            a = activations[layer]
            delta = (delta @ model.weights[layer].T) * a * (1.0 - a)
    return loss, grads_w, grads_b


def mlp_train(train: FeatureMatrix, cfg: MlpConfig) -> MlpModel:
    """Momentum SGD over shuffled mini-batches; zero epochs returns the
    initialization unchanged."""
    n_classes = int(train.y.max() + 1)
    model = init_model(train.p, n_classes, cfg)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    rng = derive_rng(cfg.seed, "mlp-shuffle")

    for epoch in range(cfg.epochs):
        order = rng.permutation(train.n)
        for start in range(0, train.n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads_w, grads_b = loss_and_gradients(model, train.x[batch],
                                                        train.y[batch])
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch}")
            for layer in range(len(model.weights)):
                vel_w[layer] = cfg.momentum * vel_w[layer] \
                    - cfg.learning_rate * grads_w[layer]
                vel_b[layer] = cfg.momentum * vel_b[layer] \
                    - cfg.learning_rate * grads_b[layer]
                model.weights[layer] += vel_w[layer]
                model.biases[layer] += vel_b[layer]
    return model


def mlp_width_search(train: FeatureMatrix, val: FeatureMatrix,
                     taus=range(1, 101),
                     base: MlpConfig | None = None) -> tuple[MlpConfig, MlpModel]:
    """Train one network per width and keep the best validation accuracy;
    ties keep the smaller width."""
    taus = list(taus)
    if not taus:
        raise ValueError("taus must be nonempty")
    if any(t < 1 for t in taus):
        raise ValueError("every tau must be at least 1")
    base = base if base is not None else MlpConfig(tau=taus[0])
    best: tuple[float, MlpConfig, MlpModel] | None = None
    for tau in sorted(taus):
        cfg = replace(base, tau=tau)
        model = mlp_train(train, cfg)
        acc = float(np.mean(mlp_predict(model, val) == val.y))
        if best is None or acc > best[0]:
            best = (acc, cfg, model)
    return best[1], best[2]
