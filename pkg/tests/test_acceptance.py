"""Acceptance suite: the headline statistical behavior of the package.

Every test prints one [PASS]/[FAIL] line (run with ``pytest -s`` to see them
live). The replication-heavy experiments are deterministic given their fixed
seeds and cache their aggregates under tests/.acceptance_cache, so re-runs
are cheap; delete the directory to force a full recompute (~45 min single
core).
"""
import json
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from misreport.errors import EmptyStratumError
from misreport.estimators import EstimatorKind, PluginEffects
from misreport.learners import LearnerSpec
from misreport.learners.gbt import GbtParams, fit_gbt
from misreport.learners.logreg import loss_and_gradient
from misreport.ocsvm import fit_ocsvm, outlier_mask
from misreport.runner import (
    BootstrapConfig,
    SweepSpec,
    SweptParameter,
    derive_seed,
    run_replication,
    run_sweep,
)
from misreport.simgen import Scenario, SimulationSpec, simulate
from misreport.uncertainty import EffectCovariance, delta_variance

CACHE = Path(__file__).parent / ".acceptance_cache"
N = 30_000
REPS = 100


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"\n[FAIL] {name}")
        raise
    print(f"\n[PASS] {name}")


def cached(name, builder):
    CACHE.mkdir(exist_ok=True)
    path = CACHE / f"{name}.json"
    if path.exists():
        return json.loads(path.read_text())
    payload = builder()
    path.write_text(json.dumps(payload))
    return payload


def sweep_aggregates(sweep):
    result = run_sweep(sweep)
    return [
        {
            "param_value": r.param_value,
            "estimator": r.estimator.value,
            "mean": r.mean,
            "std": r.std,
            "n_ok": r.n_ok,
            "n_fail": r.n_fail,
            "true_mr": r.true_mr,
        }
        for r in result.rows
    ]


def cell(rows, estimator, value):
    (match,) = [
        r
        for r in rows
        if r["estimator"] == estimator and abs(r["param_value"] - value) < 1e-12
    ]
    return match


def fig2_left():
    sweep = SweepSpec(
        base=SimulationSpec(Scenario.SIM1, n=N, seed=101),
        swept_parameter=SweptParameter.BETA_A,
        values=(0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30),
        replications=REPS,
        estimators=(EstimatorKind.CMRE, EstimatorKind.NMRE, EstimatorKind.NDEE),
    )
    return sweep_aggregates(sweep)


def fig2_middle():
    sweep = SweepSpec(
        base=SimulationSpec(Scenario.SIM1, n=N, seed=102),
        swept_parameter=SweptParameter.BETA_XSTAR,
        values=(0.1, 0.2, 0.3, 0.4, 0.5),
        replications=REPS,
        estimators=(EstimatorKind.CMRE,),
    )
    return sweep_aggregates(sweep)


def fig2_right():
    sweep = SweepSpec(
        base=SimulationSpec(Scenario.SIM1, n=N, seed=103),
        swept_parameter=SweptParameter.TARGET_MR,
        values=(0.0, 0.05, 0.10, 0.15, 0.20),
        replications=REPS,
        estimators=(EstimatorKind.CMRE, EstimatorKind.OCSVM),
    )
    return sweep_aggregates(sweep)


def scenario_defaults(scenario, seed, estimators):
    # Single-point "sweep" at the scenario's default beta_a.
    base = SimulationSpec(scenario, n=N, seed=seed)
    sweep = SweepSpec(
        base=base,
        swept_parameter=SweptParameter.BETA_A,
        values=(base.resolved_beta_a(),),
        replications=REPS,
        estimators=estimators,
    )
    return sweep_aggregates(sweep)


class TestFigure2:
    def test_left_panel_genuine_modification_sweep(self):
        rows = cached("fig2_left", fig2_left)
        with criterion(
            "Fig2-left: CMRE unbiased across beta_a; NDEE/NMRE biased at 0.3"
        ):
            for value in (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30):
                c = cell(rows, "cmre", value)
                assert abs(c["mean"] - 0.2) <= 0.03, (value, c)
            assert abs(cell(rows, "ndee", 0.0)["mean"] - 0.2) <= 0.03
            assert abs(cell(rows, "ndee", 0.30)["mean"] - 0.2) > 0.03
            assert abs(cell(rows, "nmre", 0.30)["mean"] - 0.2) > 0.03

    def test_middle_panel_effect_strength_sweep(self):
        rows = cached("fig2_middle", fig2_middle)
        with criterion(
            "Fig2-middle: CMRE unbiased across beta_xstar; variance grows as "
            "the effect shrinks"
        ):
            for value in (0.1, 0.2, 0.3, 0.4, 0.5):
                c = cell(rows, "cmre", value)
                assert abs(c["mean"] - 0.2) <= 0.04, (value, c)
            assert cell(rows, "cmre", 0.1)["std"] > cell(rows, "cmre", 0.5)["std"]

    def test_right_panel_mr_sweep(self):
        rows = cached("fig2_right", fig2_right)
        with criterion(
            "Fig2-right: CMRE tracks the true MR; OC-SVM flat across the sweep"
        ):
            for value in (0.0, 0.05, 0.10, 0.15, 0.20):
                c = cell(rows, "cmre", value)
                assert abs(c["mean"] - value) <= 0.03, (value, c)
            oc = [cell(rows, "ocsvm", v)["mean"] for v in (0.0, 0.05, 0.10, 0.15, 0.20)]
            assert max(oc) - min(oc) < 0.02, oc


class TestAppendixScenarios:
    def test_sims_2_to_5_cmre_and_nos_bias(self):
        results = {
            sc.value: cached(
                f"scenario_{sc.value}",
                lambda sc=sc, seed=seed: scenario_defaults(
                    sc, seed, (EstimatorKind.CMRE, EstimatorKind.NDEE_NOS)
                ),
            )
            for sc, seed in (
                (Scenario.SIM2, 112),
                (Scenario.SIM3, 113),
                (Scenario.SIM4, 114),
                (Scenario.SIM5, 115),
            )
        }
        results["sim1"] = cached(
            "scenario_sim1_nos",
            lambda: scenario_defaults(Scenario.SIM1, 111, (EstimatorKind.NDEE_NOS,)),
        )
        with criterion(
            "Appendix scenarios: CMRE within 0.03 of 0.2 in sims 2-5; "
            "NDEE-NoS biased where an A-X* common cause exists (sims 1, 2, 5)"
        ):
            for sim in ("sim2", "sim3", "sim4", "sim5"):
                c = [r for r in results[sim] if r["estimator"] == "cmre"][0]
                assert abs(c["mean"] - 0.2) <= 0.03, (sim, c)
            for sim in ("sim1", "sim2", "sim5"):
                nos = [r for r in results[sim] if r["estimator"] == "ndee-nos"][0]
                assert abs(nos["mean"] - 0.2) > 0.03, (sim, nos)


def oracle_coverage():
    # Full-refit bootstrap: the estimator's dominant noise is model-fit
    # variation across training draws, which fixed-model resampling cannot
    # see (eval-only CIs undercover at ~50-60% here).
    covered = []
    eval_vs_refit = None
    for rep in range(REPS):
        seed = derive_seed(104, rep)
        result = run_replication(
            SimulationSpec(Scenario.SIM1, n=N, seed=0),
            [EstimatorKind.CMRE],
            seed=seed,
            bootstrap_config=BootstrapConfig(B=100, level=0.95, mode=BootstrapMode.FULL_REFIT),
        )
        (rec,) = result.records
        truth = result.realized_mr["1"]
        lo, hi, _ = rec.ci
        covered.append(bool(lo <= truth <= hi))
        if rep == 0:
            eval_rec = run_replication(
                SimulationSpec(Scenario.SIM1, n=N, seed=0),
                [EstimatorKind.CMRE],
                seed=seed,
                bootstrap_config=BootstrapConfig(B=100, level=0.95),
            ).records[0]
            eval_vs_refit = {"eval": list(eval_rec.ci), "refit": [lo, hi, 0.95]}
    return {"covered": covered, "eval_vs_refit": eval_vs_refit}


class TestOracleEquivalence:
    def test_bootstrap_ci_covers_realized_rate(self):
        payload = cached("oracle_coverage", oracle_coverage)
        count = sum(payload["covered"])
        with criterion(
            f"Oracle equivalence: realized MR inside the 95% full-refit "
            f"bootstrap CI in >= 90/100 replications (got {count})"
        ):
            assert count >= 90

    def test_eval_only_ci_sits_inside_refit_ci_scale(self):
        payload = cached("oracle_coverage", oracle_coverage)
        ev = payload["eval_vs_refit"]["eval"]
        rf = payload["eval_vs_refit"]["refit"]
        with criterion(
            "Bootstrap modes: fixed-model CI endpoints within one refit "
            "CI-width of the full-refit CI on the default scenario"
        ):
            width = rf[1] - rf[0]
            assert abs(ev[0] - rf[0]) <= width
            assert abs(ev[1] - rf[1]) <= width


def delta_mc():
    mean = np.array([0.40, 0.32, 0.40])
    A = np.array([[0.5, 0.0, 0.0], [0.2, 0.4, 0.0], [0.1, 0.1, 0.5]])
    S = A @ A.T
    n, reps = 5000, 2000
    rng = np.random.default_rng(105)
    chol = np.linalg.cholesky(S)
    ratios = np.empty(reps)
    for r in range(reps):
        draws = rng.standard_normal((n, 3)) @ chol.T + mean
        m = draws.mean(axis=0)
        ratios[r] = (m[0] - m[1]) / m[2]
    mc_var = float(ratios.var(ddof=1))
    eff = PluginEffects(*mean, n, n)
    dv = delta_variance(eff, EffectCovariance(S, sample_count=n))
    return {"mc_var": mc_var, "delta_var": dv}


class TestDeltaMethod:
    def test_matches_monte_carlo_variance(self):
        payload = cached("delta_mc", delta_mc)
        rel = abs(payload["delta_var"] - payload["mc_var"]) / payload["mc_var"]
        with criterion(
            f"Delta method: Theorem-style variance within 20% of Monte Carlo "
            f"(relative error {rel:.3f})"
        ):
            assert rel <= 0.20


class TestLemma3:
    def test_count_identity_every_scenario(self):
        with criterion(
            "Marginal-difference identity: count(X=1) - count(X*=1) == "
            "count(X=1, X*=0) exactly on every simulated pair"
        ):
            for sc in Scenario:
                for seed in (0, 1, 2):
                    pair = simulate(SimulationSpec(sc, n=N, seed=seed))
                    x = pair.d.feature.astype(np.int64)
                    xs = pair.d.true_feature.astype(np.int64)
                    assert x.sum() - xs.sum() == int(((x == 1) & (xs == 0)).sum())


class TestOcSvmNuProperty:
    def test_outlier_fraction_bounds(self):
        n = 500
        with criterion(
            "OC-SVM nu-property: training outlier fraction within "
            "[nu/2, 2nu + 2/sqrt(n)] over 20 Gaussian fixtures at nu in {0.01, 0.1}"
        ):
            for nu in (0.01, 0.1):
                for seed in range(20):
                    pts = np.random.default_rng(seed).normal(size=(n, 2))
                    model = fit_ocsvm(pts, nu=nu, gamma=0.5)
                    frac = outlier_mask(model, pts).mean()
                    assert nu / 2 <= frac <= 2 * nu + 2 / np.sqrt(n), (nu, seed, frac)


class TestLearnerNumerics:
    def test_gradient_and_loss_curve(self):
        with criterion(
            "Learner numerics: logistic gradient matches finite differences "
            "to 1e-4; GBT loss non-increasing per round"
        ):
            rng = np.random.default_rng(106)
            X = rng.normal(size=(40, 4))
            y = rng.integers(0, 2, 40).astype(float)
            w = rng.normal(scale=0.5, size=4)
            b = 0.3
            _, grad_w, grad_b = loss_and_gradient(X, y, w, b, 0.05)
            eps = 1e-5
            for j in range(4):
                wp, wm = w.copy(), w.copy()
                wp[j] += eps
                wm[j] -= eps
                fd = (
                    loss_and_gradient(X, y, wp, b, 0.05)[0]
                    - loss_and_gradient(X, y, wm, b, 0.05)[0]
                ) / (2 * eps)
                assert abs(grad_w[j] - fd) <= 1e-4 * max(1.0, abs(fd))
            fd_b = (
                loss_and_gradient(X, y, w, b + eps, 0.05)[0]
                - loss_and_gradient(X, y, w, b - eps, 0.05)[0]
            ) / (2 * eps)
            assert abs(grad_b - fd_b) <= 1e-4 * max(1.0, abs(fd_b))

            Xg = np.column_stack([rng.uniform(size=400), rng.integers(0, 2, 400)])
            yg = (rng.uniform(size=400) < 0.2 + 0.4 * Xg[:, 1]).astype(float)
            model = fit_gbt(Xg, yg, GbtParams(n_rounds=60))
            assert np.all(np.diff(model.loss_curve) <= 1e-12)


def multi_agent_recovery():
    targets = {"a1": 0.0, "a2": 0.0, "a3": 0.1, "a4": 0.2, "a5": 0.3}
    sums = {a: 0.0 for a in targets}
    count = 0
    for rep in range(REPS):
        seed = derive_seed(107, rep)
        result = run_replication(
            SimulationSpec(Scenario.SIM1, n=N, seed=0),
            [EstimatorKind.CMRE],
            seed=seed,
            agent_targets=targets,
        )
        ok = {r.agent: r for r in result.records if r.ok}
        if len(ok) < len(targets):
            continue
        for agent, rec in ok.items():
            sums[agent] += rec.value
        count += 1
    return {
        "targets": targets,
        "means": {a: sums[a] / count for a in targets},
        "complete_reps": count,
    }


class TestMultiAgent:
    def test_per_agent_target_recovery(self):
        payload = cached("multi_agent", multi_agent_recovery)
        with criterion(
            "Multi-agent: per-agent CMRE means recover targets "
            "{0, 0, 0.1, 0.2, 0.3} within 0.04 over 100 replications"
        ):
            assert payload["complete_reps"] >= 95
            for agent, target in payload["targets"].items():
                got = payload["means"][agent]
                assert abs(got - target) <= 0.04, (agent, target, got)
