"""Feedforward softmax classifier trained with Adam and early stopping.

ReLU hidden layers, cross-entropy loss, Glorot-uniform initialization and
mini-batch shuffling both driven by a seeded generator. Training keeps the
parameter snapshot with the best validation loss and stops once the number of
consecutive epochs without improvement exceeds the patience.
"""

from __future__ import annotations

import numpy as np

from ..errors import FitError
from ..staterep import StateMatrix
from .base import PolicyModel, register_model
from .logreg import softmax

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def init_params(
    layer_sizes: list[int], rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Glorot-uniform weights and zero biases for consecutive layer pairs."""
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(
    params: list[tuple[np.ndarray, np.ndarray]], X: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Class probabilities plus per-layer activations (inputs first)."""
    activations = [X]
    h = X
    for i, (W, b) in enumerate(params):
        z = h @ W + b
        if i < len(params) - 1:
            h = np.maximum(z, 0.0)
        else:
            h = softmax(z)
        activations.append(h)
    return h, activations


def loss_and_grads(
    params: list[tuple[np.ndarray, np.ndarray]], X: np.ndarray, Y: np.ndarray
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean cross-entropy and its gradient for every weight and bias."""
    n = X.shape[0]
    probs, activations = forward(params, X)
    loss = -float(np.sum(Y * np.log(np.maximum(probs, 1e-300)))) / n
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)
    delta = (probs - Y) / n
    for i in range(len(params) - 1, -1, -1):
        h_in = activations[i]
        grads[i] = (h_in.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ params[i][0].T) * (activations[i] > 0)
    return loss, grads


@register_model
class MLPPolicy(PolicyModel):
    kind = "mlp"

    def __init__(self, feature_names, class_labels, params):
        super().__init__(feature_names, class_labels)
        self.params = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) for W, b in params]

    def _predict_proba_impl(self, X: np.ndarray) -> np.ndarray:
        probs, _ = forward(self.params, X)
        return probs

    def _params_dict(self) -> dict:
        return {
            "layers": [
                {"W": W.tolist(), "b": b.tolist()} for W, b in self.params
            ]
        }

    @classmethod
    def _from_params(cls, feature_names, class_labels, params) -> "MLPPolicy":
        layers = [(np.array(l["W"]), np.array(l["b"])) for l in params["layers"]]
        return cls(feature_names, class_labels, layers)


def fit_mlp(
    train: StateMatrix,
    val: StateMatrix,
    hidden_dims: tuple[int, ...] = (32,),
    lr: float = 1e-3,
    batch_size: int = 64,
    max_epochs: int = 100,
    patience: int = 5,
    seed: int = 0,
) -> MLPPolicy:
    """Train with Adam; returns the snapshot with the best validation loss."""
    X, y = train.X, train.y
    K = train.n_actions
    if np.unique(y).size < 2:
        raise FitError("MLP needs at least 2 classes in training data")
    n, d = X.shape
    Y = np.zeros((n, K))
    Y[np.arange(n), y] = 1.0
    Yv = np.zeros((val.n_rows, K))
    Yv[np.arange(val.n_rows), val.y] = 1.0

    rng = np.random.default_rng(seed)
    params = init_params([d, *hidden_dims, K], rng)
    m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]

    def val_loss() -> float:
        probs, _ = forward(params, val.X)
        return -float(np.sum(Yv * np.log(np.maximum(probs, 1e-300)))) / max(val.n_rows, 1)

    best_loss = val_loss()
    best_params = [(W.copy(), b.copy()) for W, b in params]
    epochs_since_best = 0
    step = 0
    batch_size = max(1, min(batch_size, n))

    for _ in range(max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grads = loss_and_grads(params, X[idx], Y[idx])
            if not np.isfinite(loss):
                raise FitError("training diverged: non-finite loss")
            step += 1
            c1 = 1.0 - ADAM_BETA1**step
            c2 = 1.0 - ADAM_BETA2**step
            for i, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
                mW, mb = m[i]
                vW, vb = v[i]
                mW[...] = ADAM_BETA1 * mW + (1 - ADAM_BETA1) * gW
                mb[...] = ADAM_BETA1 * mb + (1 - ADAM_BETA1) * gb
                vW[...] = ADAM_BETA2 * vW + (1 - ADAM_BETA2) * gW**2
                vb[...] = ADAM_BETA2 * vb + (1 - ADAM_BETA2) * gb**2
                W -= lr * (mW / c1) / (np.sqrt(vW / c2) + ADAM_EPS)
                b -= lr * (mb / c1) / (np.sqrt(vb / c2) + ADAM_EPS)
        current = val_loss()
        if not np.isfinite(current):
            raise FitError("training diverged: non-finite validation loss")
        if current < best_loss - 1e-12:
            best_loss = current
            best_params = [(W.copy(), b.copy()) for W, b in params]
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > patience:
                break

    return MLPPolicy(train.feature_names, train.action_labels, best_params)
