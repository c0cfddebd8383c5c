"""Reproducible generators for the loan-fraud style simulation scenarios.

Five hardcoded structural-equation scenarios share the template

    A ~ Bernoulli(selection(C)),  X* ~ Bernoulli(base_x(C) + beta_a A),
    Y ~ Bernoulli(base_y(C) + effect(C) X*),
    X = X* + A (1 - X*) Bernoulli(mu),

where scenarios 2-5 first let strategic agents genuinely modify the education
covariate (a mediator) with strength beta_m. ``mu`` is computed per draw from
the realized P(X*=1 | A=1) so the empirical misreporting rate targets the
requested value. Rows with A=1 become the manipulated dataset (ground-truth
feature retained for oracle tests); rows with A=0 become the unmanipulated
reference with the true feature exposed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .data import DatasetRole, TabularDataset
from .errors import InfeasibleTargetError, ParameterError, SimulationSpecError

COVARIATE_NAMES = ("c_a", "c_e", "c_s", "c_m")

#: Placeholder synthetic marginals approximating the public credit data;
#: carry no authority and are fully configurable.
DEFAULT_MARGINALS = {"c_e": 0.47, "c_s": 0.40, "c_m": 0.53}

DEFAULT_AGENT_ID = "1"


class Scenario(Enum):
    SIM1 = "sim1"
    SIM2 = "sim2"
    SIM3 = "sim3"
    SIM4 = "sim4"
    SIM5 = "sim5"


#: Per-scenario covariate roles: which columns confound the feature-outcome
#: relationship (the CMRE adjustment set) and which are common causes of the
#: agent and the true feature (what the NoS ablation must drop).
ROLE_MANIFESTS: dict[Scenario, dict[str, tuple[str, ...]]] = {
    Scenario.SIM1: {
        "confounders": ("c_a", "c_e", "c_s", "c_m"),
        "a_xstar_common_causes": ("c_s", "c_m"),
        "mediators": (),
    },
    Scenario.SIM2: {
        "confounders": ("c_a", "c_e", "c_s"),
        "a_xstar_common_causes": ("c_m",),
        "mediators": ("c_e",),
    },
    Scenario.SIM3: {
        "confounders": ("c_a", "c_e", "c_s"),
        "a_xstar_common_causes": (),
        "mediators": ("c_e",),
    },
    Scenario.SIM4: {
        "confounders": ("c_a", "c_s"),
        "a_xstar_common_causes": (),
        "mediators": ("c_e",),
    },
    Scenario.SIM5: {
        "confounders": ("c_a", "c_s"),
        "a_xstar_common_causes": ("c_m",),
        "mediators": ("c_e",),
    },
}

_SCENARIO_DEFAULT_BETA_A = {
    Scenario.SIM1: 0.3,
    Scenario.SIM2: 0.1,
    Scenario.SIM3: 0.1,
    Scenario.SIM4: 0.1,
    Scenario.SIM5: 0.1,
}


def estimator_columns(scenario: Scenario) -> dict[str, tuple[str, ...]]:
    """Adjustment sets per estimator for one scenario.

    CMRE conditions on the feature-outcome confounders; full NDEE on all
    columns; NDEE-NoC on everything except the confounders; NDEE-NoS on
    everything except the agent/true-feature common causes.
    """
    roles = ROLE_MANIFESTS[scenario]
    all_cols = COVARIATE_NAMES
    conf = roles["confounders"]
    s_cols = roles["a_xstar_common_causes"]
    return {
        "cmre": conf,
        "ndee": all_cols,
        "ndee_noc": tuple(c for c in all_cols if c not in conf),
        "ndee_nos": tuple(c for c in all_cols if c not in s_cols),
        "ocsvm": all_cols,
    }


@dataclass(frozen=True)
class CovariateSource:
    marginals: Mapping[str, float] | None = None
    csv_path: str | None = None

    @staticmethod
    def synthetic(marginals: Mapping[str, float] | None = None) -> "CovariateSource":
        return CovariateSource(marginals=dict(marginals or DEFAULT_MARGINALS))

    @staticmethod
    def csv(path: str | Path) -> "CovariateSource":
        return CovariateSource(csv_path=str(path))


@dataclass(frozen=True)
class SimulationSpec:
    scenario: Scenario
    n: int = 30_000
    beta_a: float | None = None  # per-scenario default when None
    beta_m: float | None = None  # 0.2 for scenarios with a mediator, unused in SIM1
    beta_xstar: float = 0.4
    target_mr: float = 0.2
    covariate_source: CovariateSource = field(default_factory=CovariateSource.synthetic)
    seed: int = 0
    a_intercept: float = 0.05

    def resolved_beta_a(self) -> float:
        return _SCENARIO_DEFAULT_BETA_A[self.scenario] if self.beta_a is None else self.beta_a

    def resolved_beta_m(self) -> float:
        if self.scenario is Scenario.SIM1:
            return 0.0
        return 0.2 if self.beta_m is None else self.beta_m

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be positive, got {self.n}")
        if not 0.0 <= self.target_mr < 1.0:
            raise ParameterError(f"target_mr must be in [0,1), got {self.target_mr}")


@dataclass(frozen=True)
class SimulatedPair:
    d: TabularDataset
    d_star: TabularDataset
    realized_mr: float
    mu_used: float


@dataclass(frozen=True)
class MultiAgentPair:
    d: TabularDataset
    d_star: TabularDataset
    realized_mr: dict[str, float]
    mu_used: dict[str, float]


def mu_for_target_mr(target_mr: float, p1: float) -> float:
    """Misreporting probability hitting the target rate at P(X*=1|A=1) = p1.

    From X = X* + A(1-X*)Bern(mu): MR = (1-p1)mu / (p1 + (1-p1)mu), solved
    for mu. Infeasible when the solution exceeds 1 for this draw.
    """
    if not 0.0 <= target_mr < 1.0:
        raise ParameterError(f"target_mr must be in [0,1), got {target_mr}")
    if target_mr == 0.0:
        return 0.0
    if p1 >= 1.0:
        raise InfeasibleTargetError(
            "every strategic row already has the feature; no room to misreport",
            target_mr=target_mr,
            p1=p1,
        )
    if p1 <= 0.0:
        raise InfeasibleTargetError(
            "no strategic row has the true feature; any reported positive is false "
            "(the realized rate would be 1)",
            target_mr=target_mr,
            p1=p1,
        )
    mu = target_mr * p1 / ((1.0 - p1) * (1.0 - target_mr))
    if mu > 1.0:
        raise InfeasibleTargetError(
            f"required misreporting probability {mu:.3g} exceeds 1",
            target_mr=target_mr,
            p1=p1,
        )
    return mu


def gen_covariates(
    n: int,
    marginals: Mapping[str, float] | None = None,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Synthetic covariates: age uniform on [0,1], three Bernoulli indicators."""
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    marg = dict(DEFAULT_MARGINALS)
    marg.update(marginals or {})
    for name, p in marg.items():
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"marginal for {name} must be in [0,1], got {p}")
    if rng is None:
        rng = np.random.default_rng(seed)
    c_a = rng.random(n)
    c_e = (rng.random(n) < marg["c_e"]).astype(float)
    c_s = (rng.random(n) < marg["c_s"]).astype(float)
    c_m = (rng.random(n) < marg["c_m"]).astype(float)
    return np.column_stack([c_a, c_e, c_s, c_m])


def _covariates_from_csv(path: str, n: int, rng: np.random.Generator) -> np.ndarray:
    frame = pd.read_csv(path)
    missing = [c for c in COVARIATE_NAMES if c not in frame.columns]
    if missing:
        raise ParameterError(f"covariate CSV lacks column(s) {missing}")
    if len(frame) < n:
        raise ParameterError(
            f"covariate CSV has {len(frame)} rows but n={n} requested"
        )
    take = rng.permutation(len(frame))[:n]
    return frame.loc[:, list(COVARIATE_NAMES)].to_numpy(dtype=np.float64)[take]


def _bernoulli(rng: np.random.Generator, p: np.ndarray | float, n: int) -> np.ndarray:
    return (rng.random(n) < p).astype(float)


def _checked_probability(p: np.ndarray, equation: str, spec: SimulationSpec) -> np.ndarray:
    if p.min() < 0.0 or p.max() > 1.0:
        raise SimulationSpecError(
            f"{equation} probability outside [0,1] (range [{p.min():.3g}, {p.max():.3g}]) "
            f"for beta_a={spec.resolved_beta_a()}, beta_m={spec.resolved_beta_m()}, "
            f"beta_xstar={spec.beta_xstar}"
        )
    return p


def _draw_structure(spec: SimulationSpec, rng: np.random.Generator):
    """Covariates, agent indicator, true feature, outcome; X is drawn later."""
    n = spec.n
    if spec.covariate_source.csv_path is not None:
        cov = _covariates_from_csv(spec.covariate_source.csv_path, n, rng)
    else:
        cov = gen_covariates(n, spec.covariate_source.marginals, rng=rng)
    c_a, c_e, c_s, c_m = cov.T
    beta_a = spec.resolved_beta_a()
    beta_m = spec.resolved_beta_m()
    bx = spec.beta_xstar
    s = spec.scenario

    if s is Scenario.SIM1:
        p_agent = spec.a_intercept + 0.3 * (1 - c_s) + 0.3 * (1 - c_m)
    else:
        p_agent = spec.a_intercept + 0.4 * (1 - c_m)
    a = _bernoulli(rng, _checked_probability(p_agent, "agent selection", spec), n)

    if s is Scenario.SIM1:
        ce_obs = c_e
    else:
        # Genuine modification of the education mediator by strategic rows.
        ce_obs = c_e + (1 - c_e) * a * _bernoulli(rng, beta_m, n)

    if s is Scenario.SIM1:
        p_x = 0.05 + 0.05 * c_e + 0.3 * c_s * c_m + 0.1 * c_a**2 + beta_a * a
    elif s is Scenario.SIM2:
        p_x = 0.05 + 0.25 * c_m + 0.1 * ce_obs * c_s + 0.1 * c_a**2 + beta_a * a
    elif s is Scenario.SIM3:
        p_x = 0.05 + 0.1 * ce_obs * c_s + 0.1 * c_a**2 + beta_a * a
    elif s is Scenario.SIM4:
        p_x = 0.05 + 0.3 * ce_obs * c_s + 0.1 * c_a**2 + beta_a * a
    else:
        p_x = 0.05 + 0.2 * c_m + 0.3 * ce_obs * c_s + 0.1 * c_a**2 + beta_a * a
    x_star = _bernoulli(rng, _checked_probability(p_x, "true feature", spec), n)

    if s is Scenario.SIM1:
        p_y = 0.05 + 0.05 * c_e + 0.3 * c_s * c_m + 0.1 * c_a**2 + bx * x_star
    elif s is Scenario.SIM2:
        p_y = 0.05 + 0.2 * ce_obs * c_s + 0.1 * c_a**2 + (bx + 0.1 * ce_obs) * x_star
    elif s is Scenario.SIM3:
        p_y = 0.05 + 0.2 * c_m + 0.1 * ce_obs * c_s + 0.05 * c_a**2 + (bx + 0.1 * ce_obs) * x_star
    elif s is Scenario.SIM4:
        p_y = 0.05 + 0.2 * c_m + 0.1 * c_s + 0.05 * c_a**2 + bx * x_star
    else:
        p_y = 0.05 + 0.3 * c_s + 0.05 * c_a**2 + bx * x_star
    y = _bernoulli(rng, _checked_probability(p_y, "outcome", spec), n)

    cov_obs = np.column_stack([c_a, ce_obs, c_s, c_m])
    return cov_obs, a, x_star, y


def _assemble_pair(cov_obs, a, x_star, y, x, agent_labels):
    strategic = a == 1.0
    d = TabularDataset(
        covariates=cov_obs[strategic],
        covariate_names=COVARIATE_NAMES,
        feature=x[strategic],
        outcome=y[strategic],
        role=DatasetRole.MANIPULATED,
        agent=agent_labels[strategic],
        true_feature=x_star[strategic],
    )
    d_star = TabularDataset(
        covariates=cov_obs[~strategic],
        covariate_names=COVARIATE_NAMES,
        feature=x_star[~strategic],
        outcome=y[~strategic],
        role=DatasetRole.UNMANIPULATED,
    )
    return d, d_star


def _realized_mr(x: np.ndarray, x_star: np.ndarray) -> float:
    reported = x == 1.0
    if not reported.any():
        return float("nan")
    return float(np.mean(x_star[reported] == 0.0))


def simulate(spec: SimulationSpec) -> SimulatedPair:
    """One draw of (manipulated, unmanipulated) datasets for the scenario."""
    rng = np.random.default_rng(spec.seed)
    cov_obs, a, x_star, y = _draw_structure(spec, rng)
    strategic = a == 1.0
    if not strategic.any() or strategic.all():
        raise SimulationSpecError("agent selection produced a degenerate split")
    p1 = float(np.mean(x_star[strategic]))
    mu = mu_for_target_mr(spec.target_mr, p1)
    x = x_star + a * (1 - x_star) * _bernoulli(rng, mu, spec.n)
    agent_labels = np.full(spec.n, DEFAULT_AGENT_ID, dtype=object)
    d, d_star = _assemble_pair(cov_obs, a, x_star, y, x, agent_labels)
    realized = _realized_mr(x[strategic], x_star[strategic])
    return SimulatedPair(d=d, d_star=d_star, realized_mr=realized, mu_used=mu)


def simulate_multi_agent(
    spec: SimulationSpec, agent_targets: Mapping[str, float]
) -> MultiAgentPair:
    """Scenario draw with the strategic rows split across several agents.

    Each agent gets its own misreporting probability, computed from that
    agent's realized P(X*=1) so the per-agent rates hit ``agent_targets``.
    """
    if not agent_targets:
        raise ParameterError("agent_targets must name at least one agent")
    rng = np.random.default_rng(spec.seed)
    cov_obs, a, x_star, y = _draw_structure(spec, rng)
    strategic = a == 1.0
    if not strategic.any() or strategic.all():
        raise SimulationSpecError("agent selection produced a degenerate split")

    names = list(agent_targets)
    agent_labels = np.full(spec.n, "", dtype=object)
    assignment = rng.integers(0, len(names), int(strategic.sum()))
    agent_labels[strategic] = np.array(names, dtype=object)[assignment]

    x = x_star.copy()
    mu_used: dict[str, float] = {}
    realized: dict[str, float] = {}
    for name in names:
        rows = agent_labels == name
        p1 = float(np.mean(x_star[rows]))
        mu = mu_for_target_mr(agent_targets[name], p1)
        flips = (1 - x_star[rows]) * _bernoulli(rng, mu, int(rows.sum()))
        x[rows] = x_star[rows] + flips
        mu_used[name] = mu
        realized[name] = _realized_mr(x[rows], x_star[rows])

    d, d_star = _assemble_pair(cov_obs, a, x_star, y, x, agent_labels)
    return MultiAgentPair(d=d, d_star=d_star, realized_mr=realized, mu_used=mu_used)
