"""Command-line interface: simulate / estimate / sweep."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import (
    ColumnSchema,
    DatasetRole,
    TabularDataset,
    filter_by_agent,
    load_dataset,
    save_dataset,
    split,
)
from .errors import EmptyStratumError, MisreportError, UsageError
from .estimators import (
    DEFAULT_MIN_ABS_DELTA,
    Estimand,
    EstimatorKind,
    PluginEffects,
    cmre,
    fit_agent_cate,
    fit_reference_cate,
    ndee,
    ndee_row_effects,
    nmre,
    ocsvm_rate,
    plugin_effects,
)
from .learners import LearnerSpec, cate_values
from .ocsvm import fit_ocsvm, outlier_mask
from .runner import (
    BootstrapConfig,
    SweepSpec,
    SweptParameter,
    _cmre_refit_pipeline,
    run_sweep,
    write_sweep_outputs,
)
from .simgen import (
    COVARIATE_NAMES,
    CovariateSource,
    ROLE_MANIFESTS,
    Scenario,
    SimulationSpec,
    estimator_columns,
    simulate,
)
from .uncertainty import BootstrapMode, ResamplePipeline, bootstrap, delta_variance


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MisreportError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misreport",
        description="Estimate agent misreporting rates from manipulated vs. "
        "unmanipulated data",
    )
    sub = parser.add_subparsers(required=True)

    sim = sub.add_parser("simulate", help="generate one simulated dataset pair")
    sim.add_argument("--scenario", choices=[s.value for s in Scenario], default="sim1")
    sim.add_argument("--n", type=int, default=30_000)
    sim.add_argument("--beta-a", type=float, default=None)
    sim.add_argument("--beta-m", type=float, default=None)
    sim.add_argument("--beta-xstar", type=float, default=0.4)
    sim.add_argument("--target-mr", type=float, default=0.2)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--a-intercept", type=float, default=0.05)
    sim.add_argument("--covariates-csv", default=None,
                     help="real covariates instead of the synthetic defaults")
    sim.add_argument("--out-dir", required=True)
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="estimate misreporting for CSV datasets")
    est.add_argument("--manipulated", required=True)
    est.add_argument("--unmanipulated", required=True)
    est.add_argument("--agent", default="all", help="agent id or 'all'")
    est.add_argument(
        "--estimator",
        action="append",
        choices=[k.value for k in EstimatorKind],
        required=True,
        help="repeatable",
    )
    est.add_argument("--estimand", choices=[e.value for e in Estimand], default="mr")
    est.add_argument("--bootstrap", type=int, default=None, metavar="B")
    est.add_argument("--ci-level", type=float, default=0.95)
    est.add_argument("--bootstrap-mode", choices=["eval", "refit"], default="eval")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--train-fraction", type=float, default=0.8)
    est.add_argument("--min-abs-delta", type=float, default=DEFAULT_MIN_ABS_DELTA)
    est.add_argument("--nu", type=float, default=0.01)
    est.add_argument("--gamma", type=float, default=0.1)
    est.add_argument("--clip", action="store_true",
                     help="clip estimates (and CI ends) to [0, 1]")
    est.add_argument("--roles", default=None,
                     help="roles.json with per-estimator covariate sets")
    est.add_argument("--col-x", default="x")
    est.add_argument("--col-y", default="y")
    est.add_argument("--col-agent", default=None)
    est.add_argument("--col-xstar", default=None)
    est.add_argument("--cols-c", default=None, help="comma-separated covariates")
    est.add_argument("--out", default=None, help="output file (default stdout)")
    est.set_defaults(func=cmd_estimate)

    sw = sub.add_parser("sweep", help="run a replication sweep from a JSON config")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out-dir", required=True)
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    return parser


def cmd_simulate(args) -> int:
    source = (
        CovariateSource.csv(args.covariates_csv)
        if args.covariates_csv
        else CovariateSource.synthetic()
    )
    spec = SimulationSpec(
        scenario=Scenario(args.scenario),
        n=args.n,
        beta_a=args.beta_a,
        beta_m=args.beta_m,
        beta_xstar=args.beta_xstar,
        target_mr=args.target_mr,
        covariate_source=source,
        seed=args.seed,
        a_intercept=args.a_intercept,
    )
    pair = simulate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(pair.d, out / "manipulated.csv")
    save_dataset(pair.d_star, out / "unmanipulated.csv")
    roles = {
        "scenario": spec.scenario.value,
        "covariates": list(COVARIATE_NAMES),
        **{k: list(v) for k, v in ROLE_MANIFESTS[spec.scenario].items()},
        "estimator_columns": {
            k: list(v) for k, v in estimator_columns(spec.scenario).items()
        },
    }
    (out / "roles.json").write_text(json.dumps(roles, indent=2))
    meta = {
        "mu_used": pair.mu_used,
        "realized_mr": pair.realized_mr,
        "spec": {
            "scenario": spec.scenario.value,
            "n": spec.n,
            "beta_a": spec.resolved_beta_a(),
            "beta_m": spec.resolved_beta_m(),
            "beta_xstar": spec.beta_xstar,
            "target_mr": spec.target_mr,
            "seed": spec.seed,
            "a_intercept": spec.a_intercept,
        },
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    print(f"wrote {out}/manipulated.csv ({pair.d.n} rows), "
          f"unmanipulated.csv ({pair.d_star.n} rows), roles.json, meta.json")
    return 0


def _estimator_column_sets(args, covariate_names) -> dict[str, list[str] | None]:
    if args.roles:
        roles = json.loads(Path(args.roles).read_text())
        cols = roles["estimator_columns"]
        return {k: list(v) for k, v in cols.items()}
    return {
        "cmre": None, "ndee": None, "ndee_noc": None, "ndee_nos": None, "ocsvm": None,
    }


def _clip(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def _eval_stats(rows: TabularDataset):
    x1 = rows.feature == 1.0
    return x1, int(x1.sum()), rows.n - int(x1.sum())


def cmd_estimate(args) -> int:
    cov = tuple(args.cols_c.split(",")) if args.cols_c else None
    d = load_dataset(
        args.manipulated,
        DatasetRole.MANIPULATED,
        ColumnSchema(
            feature=args.col_x, outcome=args.col_y, agent=args.col_agent,
            true_feature=args.col_xstar, covariates=cov,
        ),
    )
    d_star = load_dataset(
        args.unmanipulated,
        DatasetRole.UNMANIPULATED,
        ColumnSchema(feature=args.col_x, outcome=args.col_y, covariates=cov),
    )
    if d.agent is None:
        d = replace_agent(d, "default")
    kinds = [EstimatorKind(k) for k in args.estimator]
    col_sets = _estimator_column_sets(args, d.covariate_names)
    noc_nos = {EstimatorKind.NDEE_NOC, EstimatorKind.NDEE_NOS}
    if noc_nos & set(kinds) and args.roles is None:
        raise UsageError(
            "ndee-noc / ndee-nos need --roles (per-scenario covariate roles)"
        )

    d_train, d_eval = split(d, args.train_fraction, args.seed)
    agents = list(d.agents()) if args.agent == "all" else [args.agent]
    learner = LearnerSpec()
    estimand = Estimand(args.estimand)
    boot_cfg = (
        None
        if args.bootstrap is None
        else BootstrapConfig(
            B=args.bootstrap,
            level=args.ci_level,
            mode=BootstrapMode.EVAL_ONLY
            if args.bootstrap_mode == "eval"
            else BootstrapMode.FULL_REFIT,
        )
    )

    theta_ref = None
    if EstimatorKind.CMRE in kinds:
        theta_ref = fit_reference_cate(d_star, learner, args.seed, col_sets["cmre"])

    records = []
    for agent_id in agents:
        for kind in kinds:
            try:
                records.append(
                    _estimate_one(
                        kind, agent_id, d, d_star, d_train, d_eval, theta_ref,
                        learner, col_sets, estimand, boot_cfg, args,
                    )
                )
            except MisreportError as err:
                records.append(
                    {
                        "agent": agent_id,
                        "estimator": kind.value,
                        "estimand": estimand.value,
                        "value": None,
                        "error": f"{type(err).__name__}: {err}",
                    }
                )

    payload = "\n".join(json.dumps(r) for r in records) + "\n"
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)
    return 0


def replace_agent(ds: TabularDataset, agent_id: str) -> TabularDataset:
    return TabularDataset(
        covariates=ds.covariates,
        covariate_names=ds.covariate_names,
        feature=ds.feature,
        outcome=ds.outcome,
        role=ds.role,
        agent=np.full(ds.n, agent_id, dtype=object),
        true_feature=ds.true_feature,
    )


def _transform(estimand: Estimand, mr_value: float, p_x1: float) -> float:
    if estimand is Estimand.MR:
        return mr_value
    dim_value = mr_value * p_x1
    if estimand is Estimand.DIM:
        return dim_value
    denom = (1.0 - p_x1) + dim_value
    return dim_value / denom if denom else float("nan")


def _estimate_one(
    kind, agent_id, d, d_star, d_train, d_eval, theta_ref, learner,
    col_sets, estimand, boot_cfg, args,
):
    rows = filter_by_agent(d_eval, agent_id)
    x1, n_x1, n_x0 = _eval_stats(rows)
    p_x1 = float(rows.feature.mean()) if rows.n else float("nan")
    variance = None
    ci = None
    overlap = False

    if kind is EstimatorKind.CMRE:
        cols = col_sets["cmre"]
        theta_agent = fit_agent_cate(d_train, agent_id, learner, args.seed, cols)
        eval_sub = d_eval if cols is None else d_eval.select_covariates(cols)
        eff = plugin_effects(theta_ref, theta_agent, eval_sub, agent_id)
        mr_value = cmre(eff, args.min_abs_delta, agent=agent_id).value
        overlap = theta_ref.overlap_warning or theta_agent.overlap_warning
        if boot_cfg is not None:
            agent_rows = filter_by_agent(eval_sub, agent_id)
            ts = cate_values(theta_ref, agent_rows.covariates)
            ta = cate_values(theta_agent, agent_rows.covariates)
            xs_all = agent_rows.feature

            def fn(d_idx, star_idx, _ts=ts, _ta=ta, _x=xs_all):
                if star_idx is not None:
                    raise UsageError("refit handled through the refit pipeline")
                xs = _x[d_idx]
                sel1 = xs == 1.0
                n1 = int(sel1.sum())
                if n1 == 0 or n1 == len(xs):
                    raise EmptyStratumError("resample lost a feature stratum")
                eff_b = PluginEffects(
                    float(_ts[d_idx][sel1].mean()),
                    float(_ta[d_idx][sel1].mean()),
                    float(_ts[d_idx][~sel1].mean()),
                    n1,
                    len(xs) - n1,
                )
                mr_b = cmre(eff_b, args.min_abs_delta).value
                return _transform(estimand, mr_b, n1 / len(xs)), eff_b

            pipe = ResamplePipeline(agent_rows.n, d_star.n, fn)
            if boot_cfg.mode is BootstrapMode.FULL_REFIT:
                base_pipe = _cmre_refit_pipeline(
                    d, d_star, agent_id, learner, col_sets["cmre"], args.seed,
                    args.train_fraction, args.min_abs_delta,
                )

                def refit_fn(d_idx, star_idx, _bp=base_pipe):
                    mr_b, eff_b = _bp.fn(d_idx, star_idx)
                    return _transform(estimand, mr_b, p_x1), eff_b

                pipe = ResamplePipeline(base_pipe.n_d, base_pipe.n_star, refit_fn)
            (lo, hi), cov = bootstrap(
                pipe, boot_cfg.B, boot_cfg.level, args.seed, boot_cfg.mode
            )
            ci = (lo, hi, boot_cfg.level)
            if cov is not None and estimand is Estimand.MR:
                variance = delta_variance(eff, cov)
    elif kind is EstimatorKind.NMRE:
        mr_value = nmre(d_star, d_eval, agent_id).value
        if boot_cfg is not None:
            ci = _simple_eval_ci(
                lambda idx: _nmre_from_rows(d_star, rows, idx),
                rows.n, d_star.n, estimand, boot_cfg, args.seed,
            )
    elif kind in (EstimatorKind.NDEE, EstimatorKind.NDEE_NOC, EstimatorKind.NDEE_NOS):
        key = {"ndee": "ndee", "ndee-noc": "ndee_noc", "ndee-nos": "ndee_nos"}[kind.value]
        mr_value = ndee(
            d_train, d_star, agent_id, learner, col_sets[key], args.seed, d_eval, kind
        ).value
        if boot_cfg is not None:
            # Fixed-model resampling over the agent's evaluation rows: the
            # fused feature model stays put, so the per-row direct-effect
            # predictions can be precomputed once.
            diffs, xs_all = ndee_row_effects(
                d_train, d_star, agent_id, learner, col_sets[key], args.seed, d_eval
            )

            def nd_fn(idx):
                xs = xs_all[idx]
                pi = float(xs.mean())
                if pi == 0.0:
                    raise EmptyStratumError("resample lost all reported positives")
                return float(diffs[idx].mean()) / pi

            ci = _simple_eval_ci(nd_fn, rows.n, d_star.n, estimand, boot_cfg, args.seed)
    else:  # OCSVM
        mr_value = ocsvm_rate(
            d_star, d_eval, agent_id, nu=args.nu, gamma=args.gamma
        ).value
        if boot_cfg is not None:
            star1 = d_star.feature == 1.0
            train = np.column_stack(
                [d_star.outcome[star1], d_star.covariates[star1]]
            )
            model = fit_ocsvm(train, nu=args.nu, gamma=args.gamma)
            probe = np.column_stack([rows.outcome, rows.covariates])
            flags = outlier_mask(model, probe)
            xs_all = rows.feature

            def oc_fn(idx):
                sel = xs_all[idx] == 1.0
                if not sel.any():
                    raise EmptyStratumError("resample lost the feature=1 stratum")
                return float(flags[idx][sel].mean())

            ci = _simple_eval_ci(
                oc_fn, rows.n, d_star.n, estimand, boot_cfg, args.seed
            )

    value = _transform(estimand, mr_value, p_x1)
    if args.clip:
        value = _clip(value)
        if ci is not None:
            ci = (_clip(ci[0]), _clip(ci[1]), ci[2])
    record = {
        "agent": agent_id,
        "estimator": kind.value,
        "estimand": estimand.value,
        "value": value,
        "variance": variance,
        "ci": list(ci) if ci else None,
        "diagnostics": {"n_x1": n_x1, "n_x0": n_x0, "overlap_warning": overlap},
    }
    return record


def _nmre_from_rows(d_star, rows, idx):
    xs = rows.feature[idx]
    ys = rows.outcome[idx]
    sel1 = xs == 1.0
    if not sel1.any() or sel1.all():
        raise EmptyStratumError("resample lost a feature stratum")
    star1 = d_star.feature == 1.0
    tau_prime = float(d_star.outcome[star1].mean() - d_star.outcome[~star1].mean())
    tau_a = float(ys[sel1].mean() - ys[~sel1].mean())
    return (tau_prime - tau_a) / tau_prime


def _simple_eval_ci(value_fn, n_rows, n_star, estimand, boot_cfg, seed):
    """Fixed-model percentile CI from resampled evaluation rows."""
    if estimand is not Estimand.MR:
        raise UsageError("dim/fpr bootstrap is only wired for CMRE")
    pipe = ResamplePipeline(n_rows, n_star, lambda d_idx, _star: (value_fn(d_idx), None))
    (lo, hi), _ = bootstrap(pipe, boot_cfg.B, boot_cfg.level, seed, BootstrapMode.EVAL_ONLY)
    return (lo, hi, boot_cfg.level)


def cmd_sweep(args) -> int:
    config = json.loads(Path(args.config).read_text())
    base_cfg = dict(config["base"])
    scenario = Scenario(base_cfg.pop("scenario", "sim1"))
    cov_csv = base_cfg.pop("covariates_csv", None)
    source = CovariateSource.csv(cov_csv) if cov_csv else CovariateSource.synthetic()
    base = SimulationSpec(scenario=scenario, covariate_source=source, **base_cfg)
    boot = config.get("bootstrap")
    sweep = SweepSpec(
        base=base,
        swept_parameter=SweptParameter(config["sweep"]["parameter"]),
        values=tuple(config["sweep"]["values"]),
        replications=config.get("replications", 100),
        estimators=tuple(EstimatorKind(e) for e in config.get("estimators", ["cmre"])),
        bootstrap=None
        if boot is None
        else BootstrapConfig(
            B=boot.get("B", 100),
            level=boot.get("level", 0.95),
            mode=BootstrapMode.EVAL_ONLY
            if boot.get("mode", "eval") == "eval"
            else BootstrapMode.FULL_REFIT,
        ),
    )
    result = run_sweep(sweep, parallelism=args.jobs)
    write_sweep_outputs(result, sweep, args.out_dir)
    print(f"wrote {args.out_dir}/aggregate.csv with {len(result.rows)} rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
