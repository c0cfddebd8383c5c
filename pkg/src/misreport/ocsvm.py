"""nu-one-class SVM with RBF kernel, solved by pairwise coordinate descent.

Dual problem: minimize (1/2) a' K a subject to 0 <= a_i <= 1/(nu n) and
sum(a) = 1. The decision function is f(z) = sum_i a_i k(x_i, z) - rho; a
training point with decision < 0 is an outlier, and nu upper-bounds the
training outlier fraction (up to the usual O(1/sqrt(n)) slack).

Inputs are used as-is: the anomaly baseline feeds (y, c) columns that are
already in [0, 1], and no internal standardization is applied.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConvergenceError, ParameterError, ShapeError

#: Full kernel matrix is materialized up to this many training rows.
KERNEL_CACHE_LIMIT = 20_000

#: Alphas within this fraction of the box are treated as at-bound for rho.
_BOUND_TOL = 1e-8


class PointLabel(Enum):
    INLIER = "inlier"
    OUTLIER = "outlier"


@dataclass
class OcSvmModel:
    support_points: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float

    def decision(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        single = Z.ndim == 1
        if single:
            Z = Z[None, :]
        if Z.shape[1] != self.support_points.shape[1]:
            raise ShapeError(
                f"expected (*, {self.support_points.shape[1]}) points, got {Z.shape}"
            )
        K = _rbf(Z, self.support_points, self.gamma)
        out = K @ self.alphas - self.rho
        return out[0] if single else out


def _rbf(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _KernelRows:
    """Row access to the training kernel; materializes K only when small."""

    def __init__(self, X: np.ndarray, gamma: float, cache_limit: int):
        self.X = X
        self.gamma = gamma
        self.full = X.shape[0] <= cache_limit
        if self.full:
            self.K = _rbf(X, X, gamma)

    def row(self, i: int) -> np.ndarray:
        if self.full:
            return self.K[i]
        return _rbf(self.X[i : i + 1], self.X, self.gamma)[0]


def fit_ocsvm(
    points: np.ndarray,
    nu: float,
    gamma: float,
    tol: float = 1e-6,
    max_passes: int = 60,
    kernel_cache_limit: int = KERNEL_CACHE_LIMIT,
) -> OcSvmModel:
    """Solve the one-class dual to KKT tolerance ``tol``.

    ``max_passes`` is a dataset-equivalent budget: at most max_passes * n
    pairwise updates before a convergence error.
    """
    if not 0.0 < nu <= 1.0:
        raise ParameterError(f"nu must be in (0, 1], got {nu}")
    if gamma <= 0.0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    X = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if X.ndim != 2 or X.shape[0] < 2:
        raise ParameterError("need a 2-D matrix with at least 2 training points")
    # Canonical row order: the warm start depends on row positions, so sorting
    # makes the fitted model exactly invariant to input permutation.
    canon = np.lexsort(tuple(X[:, j] for j in reversed(range(X.shape[1]))))
    X = np.ascontiguousarray(X[canon])
    n = X.shape[0]
    if nu * n < 1.0:
        warnings.warn(
            f"nu*n = {nu * n:.3g} < 1; the box constraint exceeds the simplex",
            stacklevel=2,
        )
    cap = min(1.0 / (nu * n), 1.0)

    # libsvm-style start: the first floor(nu*n) points saturated, remainder on
    # the next point, so the simplex and box constraints hold from the start.
    alpha = np.zeros(n)
    n_sat = int(np.floor(nu * n))
    alpha[:n_sat] = cap
    if n_sat < n:
        alpha[n_sat] = 1.0 - cap * n_sat

    kernel = _KernelRows(X, gamma, kernel_cache_limit)
    if kernel.full:
        grad = kernel.K @ alpha
    else:
        grad = np.zeros(n)
        for i in np.nonzero(alpha > 0)[0]:
            grad += alpha[i] * kernel.row(i)

    budget = max_passes * n
    violation = np.inf
    for _ in range(budget):
        up_grad = np.where(alpha < cap - _BOUND_TOL * cap, grad, np.inf)
        down_grad = np.where(alpha > _BOUND_TOL * cap, grad, -np.inf)
        i = int(np.argmin(up_grad))
        j = int(np.argmax(down_grad))
        if not np.isfinite(up_grad[i]):
            break  # every alpha at the cap (nu = 1): the box pins the solution
        violation = down_grad[j] - up_grad[i]
        if violation <= tol:
            break
        ki = kernel.row(i)
        kj = kernel.row(j)
        q = ki[i] + kj[j] - 2.0 * ki[j]
        t_max = min(cap - alpha[i], alpha[j])
        t = t_max if q <= 1e-12 else min(violation / q, t_max)
        alpha[i] += t
        alpha[j] -= t
        grad += t * (ki - kj)
    else:
        raise ConvergenceError(
            f"one-class SMO did not reach tol={tol} within {budget} updates "
            f"(KKT violation {violation:.3g})",
            violation=violation,
        )

    free = (alpha > _BOUND_TOL * cap) & (alpha < cap - _BOUND_TOL * cap)
    if free.any():
        rho = float(np.mean(grad[free]))
    else:
        at_cap = alpha >= cap - _BOUND_TOL * cap
        at_zero = alpha <= _BOUND_TOL * cap
        lo = grad[at_cap].max() if at_cap.any() else -np.inf
        hi = grad[at_zero].min() if at_zero.any() else np.inf
        rho = float(lo if not np.isfinite(hi) else (lo + hi) / 2.0)

    keep = alpha > _BOUND_TOL * cap
    return OcSvmModel(
        support_points=X[keep].copy(),
        alphas=alpha[keep].copy(),
        rho=rho,
        gamma=gamma,
        nu=nu,
    )


def classify(model: OcSvmModel, z: np.ndarray) -> PointLabel:
    """Outlier iff decision(z) < 0; the boundary itself counts as inlier."""
    return PointLabel.OUTLIER if model.decision(z) < 0.0 else PointLabel.INLIER


def outlier_mask(model: OcSvmModel, Z: np.ndarray) -> np.ndarray:
    return model.decision(Z) < 0.0
