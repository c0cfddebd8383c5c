"""Misreporting-rate estimators and derived estimands.

CMRE compares S-learner treatment-effect estimates between the reference
(unmanipulated) population and one agent's manipulated data:

    MR-hat = (tau'_a - tau_a) / delta'_a

where tau'_a and delta'_a average the reference CATE over the agent's
reported-positive / reported-negative rows and tau_a averages the agent's own
CATE over the reported-positive rows. The baselines (NMRE, NDEE and its
covariate ablations, OC-SVM outlier rate) are implemented alongside.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .data import DatasetRole, TabularDataset, TRUSTED_AGENT_ID, filter_by_agent
from .errors import (
    EmptyStratumError,
    NearZeroDenominatorError,
    RoleError,
    UsageError,
    ZeroDenominatorError,
)
from .learners import CateModel, LearnerSpec, cate_values, fit, fit_s_learner
from .ocsvm import fit_ocsvm, outlier_mask

#: Below this |delta'| the ratio's variance explodes (every term of the
#: asymptotic variance carries 1/delta'^2 or worse), so we error out.
DEFAULT_MIN_ABS_DELTA = 1e-3


class Estimand(Enum):
    MR = "mr"
    DIM = "dim"
    FPR = "fpr"


class EstimatorKind(Enum):
    CMRE = "cmre"
    NMRE = "nmre"
    NDEE = "ndee"
    NDEE_NOC = "ndee-noc"
    NDEE_NOS = "ndee-nos"
    OCSVM = "ocsvm"


@dataclass(frozen=True)
class PluginEffects:
    """Plug-in effect estimates evaluated on one agent's evaluation rows."""

    tau_prime_hat: float
    tau_hat: float
    delta_prime_hat: float
    n_x1: int
    n_x0: int


@dataclass(frozen=True)
class Diagnostics:
    overlap_warning: bool = False
    n_x1: int | None = None
    n_x0: int | None = None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class MrEstimate:
    estimand: Estimand
    estimator: EstimatorKind
    value: float
    agent: str | None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    variance: float | None = None
    ci: tuple[float, float, float] | None = None  # (lower, upper, level)


def _agent_rows(ds: TabularDataset, agent_id: str) -> TabularDataset:
    if ds.role is not DatasetRole.MANIPULATED:
        raise RoleError("evaluation data must be a manipulated dataset")
    if ds.agent is None:
        raise RoleError("evaluation data has no agent column")
    return filter_by_agent(ds, agent_id)


def plugin_effects(
    theta_ref: CateModel,
    theta_agent: CateModel,
    eval_ds: TabularDataset,
    agent_id: str,
) -> PluginEffects:
    """tau'_a, tau_a, delta'_a as stratum means of CATE predictions."""
    if theta_ref.provenance.kind != "reference":
        raise UsageError("theta_ref must come from the unmanipulated reference fit")
    if theta_agent.provenance.kind != "per_agent":
        raise UsageError("theta_agent must be a per-agent fit")
    if theta_agent.provenance.agent is not None and theta_agent.provenance.agent != agent_id:
        raise UsageError(
            f"theta_agent was fitted for agent {theta_agent.provenance.agent!r}, "
            f"not {agent_id!r}"
        )
    rows = _agent_rows(eval_ds, agent_id)
    x1 = rows.feature == 1.0
    n_x1 = int(x1.sum())
    n_x0 = rows.n - n_x1
    if n_x1 == 0:
        raise EmptyStratumError(f"agent {agent_id!r} has no feature=1 evaluation rows")
    if n_x0 == 0:
        raise EmptyStratumError(f"agent {agent_id!r} has no feature=0 evaluation rows")
    theta_star = cate_values(theta_ref, rows.covariates)
    theta_a = cate_values(theta_agent, rows.covariates)
    return PluginEffects(
        tau_prime_hat=float(np.mean(theta_star[x1])),
        tau_hat=float(np.mean(theta_a[x1])),
        delta_prime_hat=float(np.mean(theta_star[~x1])),
        n_x1=n_x1,
        n_x0=n_x0,
    )


def cmre(
    effects: PluginEffects,
    min_abs_delta: float = DEFAULT_MIN_ABS_DELTA,
    agent: str | None = None,
    diagnostics: Diagnostics | None = None,
) -> MrEstimate:
    """(tau' - tau) / delta', unclipped."""
    if abs(effects.delta_prime_hat) < min_abs_delta:
        raise NearZeroDenominatorError(
            f"|delta'| = {abs(effects.delta_prime_hat):.3g} < {min_abs_delta:.3g}",
            delta_prime=effects.delta_prime_hat,
        )
    value = (effects.tau_prime_hat - effects.tau_hat) / effects.delta_prime_hat
    diag = diagnostics or Diagnostics(n_x1=effects.n_x1, n_x0=effects.n_x0)
    return MrEstimate(Estimand.MR, EstimatorKind.CMRE, value, agent, diag)


def nmre(
    d_star: TabularDataset, d_eval: TabularDataset, agent_id: str
) -> MrEstimate:
    """Difference-in-means variant that does not adjust for confounding."""
    if d_star.role is not DatasetRole.UNMANIPULATED:
        raise RoleError("d_star must be the unmanipulated dataset")
    star1 = d_star.feature == 1.0
    if not star1.any() or star1.all():
        raise EmptyStratumError("unmanipulated data lacks a feature stratum")
    tau_prime = float(d_star.outcome[star1].mean() - d_star.outcome[~star1].mean())

    rows = _agent_rows(d_eval, agent_id)
    x1 = rows.feature == 1.0
    if rows.n == 0 or not x1.any() or x1.all():
        raise EmptyStratumError(f"agent {agent_id!r} lacks a feature stratum")
    tau_a = float(rows.outcome[x1].mean() - rows.outcome[~x1].mean())

    if tau_prime == 0.0:
        raise ZeroDenominatorError("difference-in-means tau' is exactly zero")
    value = (tau_prime - tau_a) / tau_prime
    diag = Diagnostics(n_x1=int(x1.sum()), n_x0=int(rows.n - x1.sum()))
    return MrEstimate(Estimand.MR, EstimatorKind.NMRE, value, agent_id, diag)


def _one_hot(agent_col: np.ndarray, categories: list[str]) -> np.ndarray:
    index = {a: k for k, a in enumerate(categories)}
    out = np.zeros((len(agent_col), len(categories)))
    for i, a in enumerate(agent_col):
        out[i, index[a]] = 1.0
    return out


def ndee(
    d: TabularDataset,
    d_star: TabularDataset,
    agent_id: str,
    spec: LearnerSpec,
    covariate_subset: list[str] | None = None,
    seed: int = 0,
    d_eval: TabularDataset | None = None,
    kind: EstimatorKind = EstimatorKind.NDEE,
) -> MrEstimate:
    """Natural-direct-effect baseline on the fused (D, D*) dataset.

    Fits f(c, a) predicting the reported feature with the agent id one-hot
    encoded (the unmanipulated rows get the reserved trust token), then
    averages f(c_i, a) - f(c_i, a*) over the agent's evaluation rows and
    divides by the agent's empirical P(X=1). ``covariate_subset`` selects the
    adjustment set; the ablation variants pass the scenario's role manifest
    columns here.
    """
    if kind not in (EstimatorKind.NDEE, EstimatorKind.NDEE_NOC, EstimatorKind.NDEE_NOS):
        raise UsageError(f"kind must be an NDEE variant, got {kind}")
    diffs, x = ndee_row_effects(
        d, d_star, agent_id, spec, covariate_subset, seed, d_eval
    )
    pi_a = float(np.mean(x))
    if pi_a == 0.0:
        raise ZeroDenominatorError(f"agent {agent_id!r} has empirical P(X=1) = 0")
    n_x1 = int((x == 1.0).sum())
    diag = Diagnostics(n_x1=n_x1, n_x0=len(x) - n_x1)
    return MrEstimate(Estimand.MR, kind, float(diffs.mean()) / pi_a, agent_id, diag)


def ndee_row_effects(
    d: TabularDataset,
    d_star: TabularDataset,
    agent_id: str,
    spec: LearnerSpec,
    covariate_subset: list[str] | None = None,
    seed: int = 0,
    d_eval: TabularDataset | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-evaluation-row f(c, a) - f(c, a*) plus the rows' reported feature."""
    if d_eval is None:
        d_eval = d
    cols = list(covariate_subset) if covariate_subset is not None else list(d.covariate_names)
    d_sub = d.select_covariates(cols)
    star_sub = d_star.select_covariates(cols)
    eval_rows = _agent_rows(d_eval, agent_id).select_covariates(cols)
    if eval_rows.n == 0:
        raise EmptyStratumError(f"agent {agent_id!r} has no evaluation rows")

    if d_sub.agent is None:
        raise RoleError("manipulated data has no agent column")
    categories = sorted(set(d_sub.agent)) + [TRUSTED_AGENT_ID]
    fused_features = np.vstack(
        [
            np.hstack([d_sub.covariates, _one_hot(d_sub.agent, categories)]),
            np.hstack(
                [
                    star_sub.covariates,
                    _one_hot(np.full(star_sub.n, TRUSTED_AGENT_ID, dtype=object), categories),
                ]
            ),
        ]
    )
    fused_labels = np.concatenate([d_sub.feature, star_sub.feature])
    model = fit(spec, fused_features, fused_labels, seed)

    C = eval_rows.covariates
    as_agent = np.hstack([C, _one_hot(np.full(eval_rows.n, agent_id, dtype=object), categories)])
    as_trusted = np.hstack(
        [C, _one_hot(np.full(eval_rows.n, TRUSTED_AGENT_ID, dtype=object), categories)]
    )
    return model.predict(as_agent) - model.predict(as_trusted), eval_rows.feature


def ocsvm_rate(
    d_star: TabularDataset,
    d_eval: TabularDataset,
    agent_id: str,
    nu: float = 0.01,
    gamma: float = 0.1,
    tol: float = 1e-6,
    max_passes: int = 60,
) -> MrEstimate:
    """Outlier fraction of the agent's reported-positive rows.

    The detector trains on (y, c) of the unmanipulated feature=1 rows only;
    under optimal misreporting no feature=0 row can be misreported.
    """
    star1 = d_star.feature == 1.0
    if not star1.any():
        raise EmptyStratumError("unmanipulated data has no feature=1 rows")
    train = np.column_stack([d_star.outcome[star1], d_star.covariates[star1]])
    model = fit_ocsvm(train, nu=nu, gamma=gamma, tol=tol, max_passes=max_passes)

    rows = _agent_rows(d_eval, agent_id)
    x1 = rows.feature == 1.0
    if not x1.any():
        raise EmptyStratumError(f"agent {agent_id!r} has no feature=1 evaluation rows")
    probe = np.column_stack([rows.outcome[x1], rows.covariates[x1]])
    value = float(outlier_mask(model, probe).mean())
    diag = Diagnostics(n_x1=int(x1.sum()), n_x0=int(rows.n - x1.sum()))
    return MrEstimate(Estimand.MR, EstimatorKind.OCSVM, value, agent_id, diag)


def derived_estimands(
    mr: MrEstimate, p_x1: float
) -> tuple[MrEstimate, MrEstimate]:
    """Difference-in-marginals and false-positive-rate transforms of an MR.

    DIM = MR * P(X=1); FPR = MR * P(X=1) / (P(X=0) + MR * P(X=1)), whose
    denominator is the agent's P(X*=0) under optimal misreporting.
    """
    if mr.estimand is not Estimand.MR:
        raise UsageError("derived estimands transform an MR estimate")
    if not 0.0 <= p_x1 <= 1.0:
        raise UsageError(f"p_x1 must be a probability, got {p_x1}")
    dim_value = mr.value * p_x1
    denom = (1.0 - p_x1) + dim_value
    if denom == 0.0:
        raise ZeroDenominatorError("P(X*=0) is zero; FPR undefined")
    dim = replace(mr, estimand=Estimand.DIM, value=dim_value, variance=None, ci=None)
    fpr = replace(mr, estimand=Estimand.FPR, value=dim_value / denom, variance=None, ci=None)
    return dim, fpr


def fit_reference_cate(
    d_star: TabularDataset,
    spec: LearnerSpec,
    seed: int = 0,
    covariate_subset: list[str] | None = None,
) -> CateModel:
    ds = d_star if covariate_subset is None else d_star.select_covariates(covariate_subset)
    return fit_s_learner(ds, spec, seed)


def fit_agent_cate(
    d_train: TabularDataset,
    agent_id: str,
    spec: LearnerSpec,
    seed: int = 0,
    covariate_subset: list[str] | None = None,
) -> CateModel:
    rows = _agent_rows(d_train, agent_id)
    if rows.n == 0:
        raise EmptyStratumError(f"agent {agent_id!r} has no training rows")
    ds = rows if covariate_subset is None else rows.select_covariates(covariate_subset)
    return fit_s_learner(ds, spec, seed)
