"""Experiment orchestration: replications, parameter sweeps, aggregation.

One replication simulates a dataset pair, splits the manipulated data 80/20,
fits the reference CATE on all of the unmanipulated data and per-agent CATEs
on the train split, then evaluates the requested estimators on the eval
split. Sweeps repeat this over a grid of one generator parameter with
positionally derived seeds, so adding estimators or re-running a cell never
perturbs the simulated draws.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import TabularDataset, filter_by_agent, split
from .errors import EmptyStratumError, MisreportError
from .estimators import (
    DEFAULT_MIN_ABS_DELTA,
    EstimatorKind,
    MrEstimate,
    PluginEffects,
    cmre,
    fit_agent_cate,
    fit_reference_cate,
    ndee,
    nmre,
    ocsvm_rate,
    plugin_effects,
)
from .learners import CateModel, LearnerSpec, cate_values
from .simgen import (
    SimulationSpec,
    estimator_columns,
    simulate,
    simulate_multi_agent,
)
from .uncertainty import BootstrapMode, ResamplePipeline, bootstrap, delta_variance


class SweptParameter(Enum):
    BETA_A = "beta_a"
    BETA_XSTAR = "beta_xstar"
    TARGET_MR = "target_mr"


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 100
    level: float = 0.95
    mode: BootstrapMode = BootstrapMode.EVAL_ONLY


@dataclass(frozen=True)
class SweepSpec:
    base: SimulationSpec
    swept_parameter: SweptParameter
    values: tuple[float, ...]
    replications: int = 100
    estimators: tuple[EstimatorKind, ...] = (EstimatorKind.CMRE,)
    bootstrap: BootstrapConfig | None = None
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    train_fraction: float = 0.8

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep needs at least one parameter value")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass(frozen=True)
class EstimateRecord:
    estimator: EstimatorKind
    agent: str
    ok: bool
    value: float | None = None
    error: str | None = None
    variance: float | None = None
    ci: tuple[float, float, float] | None = None
    overlap_warning: bool = False


@dataclass(frozen=True)
class ReplicationResult:
    records: tuple[EstimateRecord, ...]
    realized_mr: dict[str, float]
    mu_used: dict[str, float]


@dataclass(frozen=True)
class AggregateRow:
    param_value: float
    estimator: EstimatorKind
    mean: float
    std: float
    n_ok: int
    n_fail: int
    true_mr: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[AggregateRow, ...]
    replications: tuple[dict, ...]  # raw per-replication records


def derive_seed(*parts: int) -> int:
    """Positional 64-bit seed from an integer path (splittable and stable)."""
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


def _cmre_eval_pipeline(
    theta_ref: CateModel,
    theta_agent: CateModel,
    eval_rows: TabularDataset,
    n_star: int,
    min_abs_delta: float,
) -> ResamplePipeline:
    """Fixed-model bootstrap closure: resamples evaluation rows only."""
    theta_star_vals = cate_values(theta_ref, eval_rows.covariates)
    theta_a_vals = cate_values(theta_agent, eval_rows.covariates)
    x = eval_rows.feature

    def fn(d_idx, _star_idx):
        xs = x[d_idx]
        x1 = xs == 1.0
        n1 = int(x1.sum())
        if n1 == 0 or n1 == len(xs):
            raise EmptyStratumError("resample lost a feature stratum")
        ts = theta_star_vals[d_idx]
        ta = theta_a_vals[d_idx]
        eff = PluginEffects(
            float(ts[x1].mean()), float(ta[x1].mean()), float(ts[~x1].mean()),
            n1, len(xs) - n1,
        )
        return cmre(eff, min_abs_delta).value, eff

    return ResamplePipeline(n_d=eval_rows.n, n_star=n_star, fn=fn)


def _cmre_refit_pipeline(
    d: TabularDataset,
    d_star: TabularDataset,
    agent_id: str,
    learner: LearnerSpec,
    cols: list[str] | None,
    split_seed: int,
    train_fraction: float,
    min_abs_delta: float,
) -> ResamplePipeline:
    """Full-refit bootstrap closure: resamples D and D*, refits both CATEs."""

    def fn(d_idx, star_idx):
        d_b = d.take(d_idx)
        star_b = d_star.take(star_idx)
        train_b, eval_b = split(d_b, train_fraction, split_seed)
        theta_ref = fit_reference_cate(star_b, learner, 0, cols)
        theta_agent = fit_agent_cate(train_b, agent_id, learner, 0, cols)
        eval_sub = eval_b if cols is None else eval_b.select_covariates(cols)
        eff = plugin_effects(theta_ref, theta_agent, eval_sub, agent_id)
        return cmre(eff, min_abs_delta).value, eff

    return ResamplePipeline(n_d=d.n, n_star=d_star.n, fn=fn)


def _record_from_estimate(est: MrEstimate, overlap: bool = False) -> EstimateRecord:
    return EstimateRecord(
        estimator=est.estimator,
        agent=est.agent,
        ok=True,
        value=est.value,
        variance=est.variance,
        ci=est.ci,
        overlap_warning=overlap or est.diagnostics.overlap_warning,
    )


def _failure_record(kind: EstimatorKind, agent: str, err: Exception) -> EstimateRecord:
    return EstimateRecord(
        estimator=kind, agent=agent, ok=False,
        error=f"{type(err).__name__}: {err}",
    )


def run_replication(
    spec: SimulationSpec,
    estimators: Sequence[EstimatorKind],
    seed: int,
    learner: LearnerSpec | None = None,
    train_fraction: float = 0.8,
    bootstrap_config: BootstrapConfig | None = None,
    agent_targets: Mapping[str, float] | None = None,
    min_abs_delta: float = DEFAULT_MIN_ABS_DELTA,
) -> ReplicationResult:
    """Simulate one pair and evaluate every requested estimator on it.

    Estimator failures (near-zero denominator, empty stratum) are recorded,
    not raised; the simulated draw is shared across estimators.
    """
    learner = learner or LearnerSpec()
    sim_seed = derive_seed(seed, 0)
    split_seed = derive_seed(seed, 1)
    boot_seed = derive_seed(seed, 2)

    spec = replace(spec, seed=sim_seed)
    if agent_targets is None:
        pair = simulate(spec)
        realized = {str(pair.d.agent[0]): pair.realized_mr}
        mu_used = {str(pair.d.agent[0]): pair.mu_used}
    else:
        multi = simulate_multi_agent(spec, agent_targets)
        pair = multi
        realized = dict(multi.realized_mr)
        mu_used = dict(multi.mu_used)
    d, d_star = pair.d, pair.d_star
    cols = estimator_columns(spec.scenario)
    d_train, d_eval = split(d, train_fraction, split_seed)
    agents = sorted(set(d.agent))

    records: list[EstimateRecord] = []
    needs_cmre = EstimatorKind.CMRE in estimators
    theta_ref = None
    if needs_cmre:
        theta_ref = fit_reference_cate(d_star, learner, 0, list(cols["cmre"]))

    for agent_id in agents:
        for kind in estimators:
            try:
                if kind is EstimatorKind.CMRE:
                    theta_agent = fit_agent_cate(
                        d_train, agent_id, learner, 0, list(cols["cmre"])
                    )
                    eval_sub = d_eval.select_covariates(list(cols["cmre"]))
                    eff = plugin_effects(theta_ref, theta_agent, eval_sub, agent_id)
                    est = cmre(eff, min_abs_delta, agent=agent_id)
                    overlap = theta_ref.overlap_warning or theta_agent.overlap_warning
                    if bootstrap_config is not None:
                        pipe = _cmre_eval_pipeline(
                            theta_ref,
                            theta_agent,
                            filter_by_agent(eval_sub, agent_id),
                            d_star.n,
                            min_abs_delta,
                        )
                        if bootstrap_config.mode is BootstrapMode.FULL_REFIT:
                            pipe = _cmre_refit_pipeline(
                                d, d_star, agent_id, learner, list(cols["cmre"]),
                                split_seed, train_fraction, min_abs_delta,
                            )
                        (lo, hi), cov = bootstrap(
                            pipe,
                            bootstrap_config.B,
                            bootstrap_config.level,
                            boot_seed,
                            bootstrap_config.mode,
                        )
                        est = replace(
                            est,
                            ci=(lo, hi, bootstrap_config.level),
                            variance=delta_variance(eff, cov) if cov is not None else None,
                        )
                    records.append(_record_from_estimate(est, overlap))
                elif kind is EstimatorKind.NMRE:
                    records.append(_record_from_estimate(nmre(d_star, d_eval, agent_id)))
                elif kind in (
                    EstimatorKind.NDEE,
                    EstimatorKind.NDEE_NOC,
                    EstimatorKind.NDEE_NOS,
                ):
                    key = {
                        EstimatorKind.NDEE: "ndee",
                        EstimatorKind.NDEE_NOC: "ndee_noc",
                        EstimatorKind.NDEE_NOS: "ndee_nos",
                    }[kind]
                    est = ndee(
                        d_train, d_star, agent_id, learner,
                        list(cols[key]), 0, d_eval, kind,
                    )
                    records.append(_record_from_estimate(est))
                elif kind is EstimatorKind.OCSVM:
                    records.append(
                        _record_from_estimate(ocsvm_rate(d_star, d_eval, agent_id))
                    )
                else:
                    raise ValueError(f"unknown estimator {kind}")
            except MisreportError as err:
                records.append(_failure_record(kind, agent_id, err))
    return ReplicationResult(tuple(records), realized, mu_used)


def _sweep_spec_for_value(base: SimulationSpec, parameter: SweptParameter, value: float):
    return replace(base, **{parameter.value: value})


def _run_cell(args):
    (base, parameter, value, vi, ri, estimators, learner, train_fraction,
     bootstrap_config) = args
    spec = _sweep_spec_for_value(base, parameter, value)
    seed = derive_seed(base.seed, vi, ri)
    result = run_replication(
        spec, estimators, seed, learner, train_fraction, bootstrap_config
    )
    true_mr = spec.target_mr
    rows = []
    for rec in result.records:
        rows.append(
            {
                "param_value": value,
                "value_index": vi,
                "rep_index": ri,
                "estimator": rec.estimator.value,
                "agent": rec.agent,
                "ok": rec.ok,
                "value": rec.value,
                "error": rec.error,
                "variance": rec.variance,
                "ci_lower": rec.ci[0] if rec.ci else None,
                "ci_upper": rec.ci[1] if rec.ci else None,
                "realized_mr": result.realized_mr.get(rec.agent),
                "true_mr": true_mr,
                "seed": seed,
            }
        )
    return (vi, ri, rows)


def run_sweep(sweep: SweepSpec, parallelism: int = 1) -> SweepResult:
    """Replications x values grid; failures are excluded from moments and
    counted, and results are identical at any parallelism."""
    tasks = [
        (
            sweep.base, sweep.swept_parameter, value, vi, ri,
            tuple(sweep.estimators), sweep.learner, sweep.train_fraction,
            sweep.bootstrap,
        )
        for vi, value in enumerate(sweep.values)
        for ri in range(sweep.replications)
    ]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            raw = list(pool.map(_run_cell, tasks, chunksize=1))
    else:
        raw = [_run_cell(t) for t in tasks]
    raw.sort(key=lambda item: (item[0], item[1]))
    replication_rows = [row for _, _, rows in raw for row in rows]
    return SweepResult(
        rows=tuple(aggregate_rows(replication_rows)),
        replications=tuple(replication_rows),
    )


def aggregate_rows(replication_rows: Sequence[dict]) -> list[AggregateRow]:
    keys: list[tuple[float, str]] = []
    for row in replication_rows:
        key = (row["param_value"], row["estimator"])
        if key not in keys:
            keys.append(key)
    out = []
    for value, estimator in keys:
        cell = [
            r
            for r in replication_rows
            if r["param_value"] == value and r["estimator"] == estimator
        ]
        ok_values = [r["value"] for r in cell if r["ok"]]
        n_ok = len(ok_values)
        mean = float(np.mean(ok_values)) if n_ok else float("nan")
        std = float(np.std(ok_values, ddof=1)) if n_ok > 1 else 0.0
        out.append(
            AggregateRow(
                param_value=value,
                estimator=EstimatorKind(estimator),
                mean=mean,
                std=std,
                n_ok=n_ok,
                n_fail=len(cell) - n_ok,
                true_mr=cell[0]["true_mr"],
            )
        )
    return out


AGGREGATE_COLUMNS = ("param_value", "estimator", "mean", "std", "n_ok", "n_fail", "true_mr")

REPLICATION_COLUMNS = (
    "param_value", "value_index", "rep_index", "estimator", "agent", "ok",
    "value", "error", "variance", "ci_lower", "ci_upper", "realized_mr",
    "true_mr", "seed",
)


def write_sweep_outputs(result: SweepResult, sweep: SweepSpec, out_dir: str | Path) -> None:
    """aggregate.csv + replications.csv + manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "aggregate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_COLUMNS)
        for row in result.rows:
            writer.writerow(
                [
                    row.param_value, row.estimator.value, repr(row.mean),
                    repr(row.std), row.n_ok, row.n_fail, row.true_mr,
                ]
            )
    with open(out / "replications.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPLICATION_COLUMNS)
        writer.writeheader()
        for row in result.replications:
            writer.writerow(row)
    manifest = {
        "base": _spec_to_json(sweep.base),
        "sweep": {
            "parameter": sweep.swept_parameter.value,
            "values": list(sweep.values),
        },
        "replications": sweep.replications,
        "estimators": [e.value for e in sweep.estimators],
        "bootstrap": None
        if sweep.bootstrap is None
        else {
            "B": sweep.bootstrap.B,
            "level": sweep.bootstrap.level,
            "mode": sweep.bootstrap.mode.value,
        },
        "version": 1,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _spec_to_json(spec: SimulationSpec) -> dict:
    return {
        "scenario": spec.scenario.value,
        "n": spec.n,
        "beta_a": spec.beta_a,
        "beta_m": spec.beta_m,
        "beta_xstar": spec.beta_xstar,
        "target_mr": spec.target_mr,
        "seed": spec.seed,
        "a_intercept": spec.a_intercept,
    }
