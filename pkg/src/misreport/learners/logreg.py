"""L2-regularized logistic regression fit by Newton's method."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError, ValidationError
from .gbt import PROB_CLAMP, _clamped_sigmoid


@dataclass(frozen=True)
class LogRegParams:
    l2: float = 1e-4
    max_iters: int = 100
    tolerance: float = 1e-8


@dataclass
class LogisticModel:
    weights: np.ndarray  # (d,)
    intercept: float
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(
                f"expected (*, {self.n_features}) feature matrix, got shape {X.shape}"
            )
        return _clamped_sigmoid(X @ self.weights + self.intercept)


def loss_and_gradient(
    X: np.ndarray, y: np.ndarray, weights: np.ndarray, intercept: float, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy + (l2/2)|w|^2 (intercept unpenalized) and its gradient."""
    n = X.shape[0]
    p = _clamped_sigmoid(X @ weights + intercept)
    loss = float(
        -np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)) + 0.5 * l2 * weights @ weights
    )
    resid = p - y
    grad_w = X.T @ resid / n + l2 * weights
    grad_b = float(np.mean(resid))
    return loss, grad_w, grad_b


def fit_logreg(X: np.ndarray, y: np.ndarray, params: LogRegParams) -> LogisticModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if y.min() == y.max():
        raise ValidationError("logistic regression needs both label classes")
    w = np.zeros(d)
    b = 0.0
    for _ in range(params.max_iters):
        p = _clamped_sigmoid(X @ w + b)
        resid = p - y
        grad = np.concatenate([X.T @ resid / n + params.l2 * w, [np.mean(resid)]])
        if np.max(np.abs(grad)) < params.tolerance:
            break
        s = p * (1 - p)
        Xa = np.hstack([X, np.ones((n, 1))])
        hess = (Xa * s[:, None]).T @ Xa / n
        hess[np.diag_indices(d)] += params.l2
        hess[np.diag_indices(d + 1)] += 1e-12  # guards exact singularity at l2=0
        step = np.linalg.solve(hess, grad)
        w -= step[:d]
        b -= step[d]
    return LogisticModel(w, float(b), d)
