"""Multinomial logistic regression with L2-penalized weights.

The objective is the mean cross-entropy plus ||W||^2 / (2*C*N), with
intercepts left unpenalized. It is smooth and convex, so a quasi-Newton
minimizer from a zero start yields a deterministic optimum; we stop when the
max-norm of the gradient drops below tolerance.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..errors import FitError
from ..staterep import StateMatrix
from .base import PolicyModel, register_model


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def penalized_objective(
    theta: np.ndarray, X: np.ndarray, Y: np.ndarray, C: float
) -> tuple[float, np.ndarray]:
    """Loss and gradient at flattened parameters [W (d x K), b (K)]."""
    n, d = X.shape
    K = Y.shape[1]
    W = theta[: d * K].reshape(d, K)
    b = theta[d * K :]
    logits = X @ W + b
    logp = _log_softmax(logits)
    loss = -float((Y * logp).sum()) / n + float((W * W).sum()) / (2.0 * C * n)
    P = np.exp(logp)
    R = (P - Y) / n
    grad_W = X.T @ R + W / (C * n)
    grad_b = R.sum(axis=0)
    return loss, np.concatenate([grad_W.ravel(), grad_b])


@register_model
class LogisticPolicy(PolicyModel):
    kind = "logreg"

    def __init__(self, feature_names, class_labels, W: np.ndarray, b: np.ndarray):
        super().__init__(feature_names, class_labels)
        self.W = np.asarray(W, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def _predict_proba_impl(self, X: np.ndarray) -> np.ndarray:
        return softmax(X @ self.W + self.b)

    def _params_dict(self) -> dict:
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    @classmethod
    def _from_params(cls, feature_names, class_labels, params) -> "LogisticPolicy":
        return cls(feature_names, class_labels, np.array(params["W"]), np.array(params["b"]))


def fit_logreg(
    train: StateMatrix,
    C: float = 1.0,
    max_iter: int = 2000,
    tol: float = 1e-6,
) -> LogisticPolicy:
    """Fit the softmax model to convergence (max-norm of gradient <= tol)."""
    if C <= 0:
        raise FitError("C must be positive")
    X, y = train.X, train.y
    K = train.n_actions
    if np.unique(y).size < 2:
        raise FitError("logistic regression needs at least 2 classes in training data")
    n, d = X.shape
    Y = np.zeros((n, K))
    Y[np.arange(n), y] = 1.0
    theta0 = np.zeros(d * K + K)
    res = minimize(
        penalized_objective,
        theta0,
        args=(X, Y, C),
        method="L-BFGS-B",
        jac=True,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-14, "maxcor": 20},
    )
    theta = res.x
    W = theta[: d * K].reshape(d, K)
    b = theta[d * K :]
    return LogisticPolicy(train.feature_names, train.action_labels, W, b)
