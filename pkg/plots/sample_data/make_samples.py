#!/usr/bin/env python3
"""Regenerate the checked-in sample CSVs through the misreport CLI.

Small but real runs (n=4000, 3 replications) so the files carry the exact
schemas the render scripts consume. The multi-agent fixture comes from the
package's multi-agent generator, then goes through `misreport estimate` like
any user dataset would.
"""
import csv
import json
import subprocess
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).parent


def run(*argv):
    out = subprocess.run(
        [sys.executable, "-m", "misreport.cli", *argv],
        check=True, capture_output=True, text=True,
    )
    return out.stdout


def make_sweeps(workdir: Path):
    base = {"scenario": "sim1", "n": 4000, "seed": 20}
    sweeps = {
        "beta_a": {"parameter": "beta_a", "values": [0.0, 0.1, 0.2, 0.3]},
        "beta_xstar": {"parameter": "beta_xstar", "values": [0.1, 0.2, 0.3, 0.4, 0.5]},
        "target_mr": {"parameter": "target_mr", "values": [0.0, 0.05, 0.1, 0.15, 0.2]},
    }
    for name, sweep in sweeps.items():
        config = {
            "base": base,
            "sweep": sweep,
            "replications": 3,
            "estimators": ["cmre", "nmre", "ndee", "ocsvm"],
        }
        cfg_path = workdir / f"{name}.json"
        cfg_path.write_text(json.dumps(config))
        out_dir = workdir / name
        run("sweep", "--config", str(cfg_path), "--out-dir", str(out_dir))
        (HERE / f"{name}.csv").write_text((out_dir / "aggregate.csv").read_text())
        print(f"wrote {name}.csv")


def make_agents(workdir: Path):
    sys.path.insert(0, str(HERE.parents[1] / "src"))
    from misreport.data import save_dataset
    from misreport.simgen import Scenario, SimulationSpec, simulate_multi_agent

    targets = {"a1": 0.0, "a2": 0.05, "a3": 0.1, "a4": 0.2, "a5": 0.3}
    pair = simulate_multi_agent(SimulationSpec(Scenario.SIM1, n=12_000, seed=21), targets)
    d_path = workdir / "manipulated.csv"
    star_path = workdir / "unmanipulated.csv"
    save_dataset(pair.d, d_path)
    save_dataset(pair.d_star, star_path)
    stdout = run(
        "estimate",
        "--manipulated", str(d_path),
        "--unmanipulated", str(star_path),
        "--agent", "all",
        "--estimator", "cmre",
        "--estimator", "nmre",
        "--estimator", "ndee",
        "--estimator", "ocsvm",
        "--col-agent", "a",
        "--bootstrap", "40",
        "--seed", "22",
    )
    records = [json.loads(line) for line in stdout.strip().splitlines()]
    with open(HERE / "agents.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "estimator", "value", "ci_lower", "ci_upper"])
        for rec in records:
            if rec.get("value") is None:
                continue
            writer.writerow(
                [rec["agent"], rec["estimator"], rec["value"], rec["ci"][0], rec["ci"][1]]
            )
    print("wrote agents.csv")


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        make_sweeps(work)
        make_agents(work)
