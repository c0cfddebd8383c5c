"""Supervised learners and the S-learner CATE wrapper.

One outcome model f(c, x) is trained on [covariates | feature] -> outcome;
the CATE is theta(c) = f(c, 1) - f(c, 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from ..data import DatasetRole, TabularDataset
from ..errors import ShapeError, SizeError, UsageError, ValidationError
from .backend import BACKEND
from .gbt import GbtModel, GbtParams, fit_gbt
from .logreg import LogisticModel, LogRegParams, fit_logreg

__all__ = [
    "BACKEND",
    "LearnerKind",
    "GbtParams",
    "LogRegParams",
    "LearnerSpec",
    "MeanModel",
    "GbtModel",
    "LogisticModel",
    "OutcomeModel",
    "Provenance",
    "CateModel",
    "fit",
    "fit_s_learner",
    "cate",
    "cate_values",
]


class LearnerKind(Enum):
    GRADIENT_BOOSTED_TREES = "gbt"
    LOGISTIC_REGRESSION = "logreg"
    MEAN_ONLY = "mean"


@dataclass(frozen=True)
class LearnerSpec:
    kind: LearnerKind = LearnerKind.GRADIENT_BOOSTED_TREES
    gbt: GbtParams = field(default_factory=GbtParams)
    logreg: LogRegParams = field(default_factory=LogRegParams)

    @staticmethod
    def gbt_default(**overrides) -> "LearnerSpec":
        return LearnerSpec(LearnerKind.GRADIENT_BOOSTED_TREES, gbt=GbtParams(**overrides))

    @staticmethod
    def logistic(**overrides) -> "LearnerSpec":
        return LearnerSpec(LearnerKind.LOGISTIC_REGRESSION, logreg=LogRegParams(**overrides))

    @staticmethod
    def mean_only() -> "LearnerSpec":
        return LearnerSpec(LearnerKind.MEAN_ONLY)


@dataclass
class MeanModel:
    """Predicts the training label mean regardless of input."""

    mean: float
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        return np.full(X.shape[0], self.mean)


OutcomeModel = Union[GbtModel, LogisticModel, MeanModel]


def fit(
    spec: LearnerSpec, features: np.ndarray, labels: np.ndarray, seed: int = 0
) -> OutcomeModel:
    """Fit one outcome model mapping feature rows to P(label=1).

    All learners here are deterministic; ``seed`` is accepted for interface
    uniformity and ignored.
    """
    del seed
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"features must be 2-D, got ndim={X.ndim}")
    if X.shape[0] != y.shape[0]:
        raise ShapeError("features/labels row mismatch")
    if X.shape[0] < 2:
        raise SizeError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise ValidationError("non-finite feature value")
    if not np.isfinite(y).all():
        raise ValidationError("non-finite label value")
    if spec.kind is LearnerKind.MEAN_ONLY:
        return MeanModel(float(np.mean(y)), X.shape[1])
    if spec.kind is LearnerKind.LOGISTIC_REGRESSION:
        return fit_logreg(X, y, spec.logreg)
    return fit_gbt(X, y, spec.gbt)


@dataclass(frozen=True)
class Provenance:
    """Which population a CATE model was fitted on."""

    kind: str  # "reference" | "per_agent"
    agent: str | None = None

    @staticmethod
    def reference() -> "Provenance":
        return Provenance("reference")

    @staticmethod
    def per_agent(agent: str | None) -> "Provenance":
        return Provenance("per_agent", agent)


@dataclass
class CateModel:
    """S-learner CATE: difference of outcome-model predictions at x=1 and x=0."""

    outcome_model: OutcomeModel
    provenance: Provenance
    overlap_warning: bool = False

    @property
    def n_covariates(self) -> int:
        return self.outcome_model.n_features - 1


def fit_s_learner(train: TabularDataset, spec: LearnerSpec, seed: int = 0) -> CateModel:
    """Train an S-learner on [covariates | feature] -> outcome.

    Manipulated inputs must already be filtered to a single agent (the
    estimation equations are per-agent); a constant feature column is an
    overlap violation and sets a warning flag instead of aborting, so extreme
    sweep settings degrade visibly rather than fatally.
    """
    if train.n < 1:
        raise SizeError("empty training dataset")
    if train.role is DatasetRole.MANIPULATED:
        if train.agent is not None and len(set(train.agent)) > 1:
            raise UsageError(
                "manipulated training data mixes agents; filter to one agent first"
            )
        agent = str(train.agent[0]) if train.agent is not None else None
        provenance = Provenance.per_agent(agent)
    else:
        provenance = Provenance.reference()
    features = np.hstack([train.covariates, train.feature[:, None]])
    model = fit(spec, features, train.outcome, seed)
    overlap = bool(train.feature.min() == train.feature.max())
    return CateModel(model, provenance, overlap_warning=overlap)


def cate_values(model: CateModel, covariates: np.ndarray) -> np.ndarray:
    """theta(c) for a batch of covariate rows."""
    C = np.asarray(covariates, dtype=np.float64)
    if C.ndim != 2 or C.shape[1] != model.n_covariates:
        raise ShapeError(
            f"expected (*, {model.n_covariates}) covariates, got shape {C.shape}"
        )
    ones = np.ones((C.shape[0], 1))
    at1 = model.outcome_model.predict(np.hstack([C, ones]))
    at0 = model.outcome_model.predict(np.hstack([C, 0.0 * ones]))
    return at1 - at0


def cate(model: CateModel, c: np.ndarray) -> float:
    """theta(c) for a single covariate vector; always in [-1, 1]."""
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 1:
        raise ShapeError(f"expected a covariate vector, got shape {c.shape}")
    return float(cate_values(model, c[None, :])[0])
