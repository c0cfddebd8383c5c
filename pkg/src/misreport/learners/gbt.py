"""Gradient-boosted decision trees with second-order logistic loss.

Exact greedy split finding over sorted unique thresholds, L2-regularized leaf
weights, no subsampling or early stopping. Matches the standard boosting tool
defaults (learning rate 0.3, depth 6, lambda 1, min child weight 1).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ShapeError
from . import backend
from .backend import grow_tree

PROB_CLAMP = 1e-9
BASE_SCORE_CLAMP = 10.0


@dataclass(frozen=True)
class GbtParams:
    learning_rate: float = 0.3
    max_depth: int = 6
    l2_lambda: float = 1.0
    n_rounds: int = 100
    min_child_weight: float = 1.0


@dataclass
class _Tree:
    """One regression tree in flat-array form; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    is_leaf: np.ndarray

    def leaf_of(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        pending = ~self.is_leaf[node]
        while pending.any():
            rows = np.nonzero(pending)[0]
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] < self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            pending[rows] = ~self.is_leaf[node[rows]]
        return node


@dataclass
class GbtModel:
    """Fitted boosted-tree classifier; immutable after fit."""

    base_score: float
    trees: list[_Tree]
    n_features: int
    params: GbtParams
    loss_curve: np.ndarray = field(repr=False, default=None)
    _arena: tuple | None = field(repr=False, default=None, compare=False)

    def _flat(self):
        # All trees concatenated into one node arena so prediction walks every
        # tree simultaneously instead of looping per tree.
        if self._arena is None:
            sizes = [t.feature.shape[0] for t in self.trees]
            offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
            feat = np.concatenate([t.feature for t in self.trees]).astype(np.int32)
            thresh = np.concatenate([t.threshold for t in self.trees])
            left = np.concatenate(
                [t.left + o for t, o in zip(self.trees, offsets)]
            ).astype(np.int32)
            right = np.concatenate(
                [t.right + o for t, o in zip(self.trees, offsets)]
            ).astype(np.int32)
            value = np.concatenate([t.value for t in self.trees])
            leaf = np.ascontiguousarray(np.concatenate([t.is_leaf for t in self.trees]))
            object.__setattr__(
                self, "_arena", (offsets, feat, thresh, left, right, value, leaf)
            )
        return self._arena

    def predict_margin(self, X: np.ndarray) -> np.ndarray:
        X = _check_matrix(X, self.n_features)
        n = X.shape[0]
        if not self.trees:
            return np.full(n, self.base_score)
        if backend.predict_margin is not None:
            offsets, feat, thresh, left, right, value, leaf = self._flat()
            return backend.predict_margin(
                X, feat, thresh, left, right, value,
                leaf.view(np.uint8), offsets, self.base_score,
            )
        margin = np.full(n, self.base_score)
        for tree in self.trees:
            margin += tree.value[tree.leaf_of(X)]
        return margin

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _clamped_sigmoid(self.predict_margin(X))

    def to_json(self) -> str:
        """Debug dump of the tree arrays; not a stability-guaranteed format."""
        payload = {
            "base_score": self.base_score,
            "n_features": self.n_features,
            "params": vars(self.params).copy()
            if not hasattr(self.params, "__dataclass_fields__")
            else {k: getattr(self.params, k) for k in self.params.__dataclass_fields__},
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "is_leaf": t.is_leaf.tolist(),
                }
                for t in self.trees
            ],
        }
        return json.dumps(payload)

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def _check_matrix(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ShapeError(
            f"expected (*, {n_features}) feature matrix, got shape {X.shape}"
        )
    return X


def _clamped_sigmoid(margin: np.ndarray) -> np.ndarray:
    p = 1.0 / (1.0 + np.exp(-margin))
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def fit_gbt(X: np.ndarray, y: np.ndarray, params: GbtParams) -> GbtModel:
    """Train; deterministic and invariant to input row order.

    Rows are canonically ordered (lexsort over features then label) before
    training so gradient accumulation order does not depend on how the caller
    happened to arrange the data.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape

    canon = np.lexsort(tuple([y] + [X[:, j] for j in reversed(range(m))]))
    X = np.ascontiguousarray(X[canon])
    y = y[canon]

    p_bar = float(np.mean(y))
    p_bar = min(max(p_bar, PROB_CLAMP), 1.0 - PROB_CLAMP)
    base = float(np.clip(np.log(p_bar / (1.0 - p_bar)), -BASE_SCORE_CLAMP, BASE_SCORE_CLAMP))

    # (m, n) presorted layout: row f holds positions sorted ascending by
    # feature f, so every grower scan is sequential in memory.
    XT = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))
    vs = np.ascontiguousarray(np.take_along_axis(XT, order, axis=1))

    margin = np.full(n, base)
    trees: list[_Tree] = []
    losses = np.empty(params.n_rounds)
    for r in range(params.n_rounds):
        p = _clamped_sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        parts = grow_tree(
            XT, vs, order, g, h,
            params.max_depth, params.l2_lambda,
            params.min_child_weight, params.learning_rate,
        )
        tree = _Tree(*parts[:6])
        leaf_of_row = parts[6]
        trees.append(tree)
        margin += tree.value[leaf_of_row]
        losses[r] = _log_loss(y, _clamped_sigmoid(margin))
    return GbtModel(base, trees, m, params, loss_curve=losses)
