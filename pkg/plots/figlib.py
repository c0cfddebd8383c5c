"""Figure construction for sweep panels and per-agent bar charts.

Pure consumers of the experiment runner's CSV files: every number drawn comes
straight out of a CSV cell, never recomputed. Both builders return the figure
together with the exact backing data they plotted, so callers (and tests) can
verify the values against the source files.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

ESTIMATOR_ORDER = ("cmre", "nmre", "ndee", "ndee-noc", "ndee-nos", "ocsvm")

ESTIMATOR_LABELS = {
    "cmre": "CMRE",
    "nmre": "NMRE",
    "ndee": "NDEE",
    "ndee-noc": "NDEE (no C)",
    "ndee-nos": "NDEE (no S)",
    "ocsvm": "OC-SVM",
}

ESTIMATOR_COLORS = {
    "cmre": "#1f77b4",
    "nmre": "#ff7f0e",
    "ndee": "#2ca02c",
    "ndee-noc": "#9467bd",
    "ndee-nos": "#8c564b",
    "ocsvm": "#d62728",
}

SWEEP_COLUMNS = ("param_value", "estimator", "mean", "std", "true_mr")
AGENT_COLUMNS = ("agent", "estimator", "value", "ci_lower", "ci_upper")


class ColumnError(ValueError):
    """A required CSV column is missing."""


def _read_rows(path: str | Path, required: tuple[str, ...]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise ColumnError(f"{Path(path).name} is missing column {col!r}")
        return list(reader)


@dataclass(frozen=True)
class PanelSpec:
    """One sweep panel: an aggregate CSV plus presentation choices."""

    csv_path: str | Path
    x_label: str
    true_mr: float | None = None  # None: per-point reference from the CSV
    estimators: tuple[str, ...] | None = None  # None: order of appearance
    out_path: str | Path | None = None


def _estimators_in(rows: list[dict], requested) -> list[str]:
    seen = []
    for row in rows:
        name = row["estimator"]
        if name not in seen:
            seen.append(name)
    if requested is not None:
        return [e for e in requested if e in seen]
    return sorted(seen, key=lambda e: ESTIMATOR_ORDER.index(e) if e in ESTIMATOR_ORDER else 99)


def build_sweep_figure(specs: list[PanelSpec]):
    """Multi-panel errorbar chart; returns (figure, backing data)."""
    fig, axes = plt.subplots(
        1, len(specs), figsize=(4.2 * len(specs), 3.4), squeeze=False
    )
    backing = []
    for ax, spec in zip(axes[0], specs):
        rows = _read_rows(spec.csv_path, SWEEP_COLUMNS)
        panel = {"csv": str(spec.csv_path), "series": {}, "reference": None}
        for name in _estimators_in(rows, spec.estimators):
            series = [r for r in rows if r["estimator"] == name]
            xs = [float(r["param_value"]) for r in series]
            ys = [float(r["mean"]) for r in series]
            errs = [float(r["std"]) for r in series]
            ax.errorbar(
                xs, ys, yerr=errs,
                label=ESTIMATOR_LABELS.get(name, name),
                color=ESTIMATOR_COLORS.get(name),
                marker="o", markersize=3.5, capsize=2.5, linewidth=1.3,
            )
            panel["series"][name] = {"x": xs, "y": ys, "yerr": errs}
        if spec.true_mr is not None:
            ax.axhline(spec.true_mr, linestyle="--", color="black", linewidth=1.0)
            panel["reference"] = spec.true_mr
        elif rows:
            ref_pairs = sorted(
                {(float(r["param_value"]), float(r["true_mr"])) for r in rows}
            )
            ax.plot(
                [p for p, _ in ref_pairs], [t for _, t in ref_pairs],
                linestyle="--", color="black", linewidth=1.0,
            )
            panel["reference"] = [list(pair) for pair in ref_pairs]
        ax.set_xlabel(spec.x_label)
        ax.set_ylabel("estimated misreporting rate")
        if panel["series"]:
            ax.legend(fontsize=8)
        backing.append(panel)
    fig.tight_layout()
    return fig, backing


def build_agent_figure(csv_path: str | Path):
    """Grouped per-agent bars with CI whiskers; returns (figure, backing)."""
    rows = _read_rows(csv_path, AGENT_COLUMNS)
    agents = []
    for row in rows:
        if row["agent"] not in agents:
            agents.append(row["agent"])
    estimators = _estimators_in(rows, None)
    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(agents), 3.4))
    group_width = 0.8
    bar_width = group_width / max(len(estimators), 1)
    backing = {"bars": [], "csv": str(csv_path)}
    for k, name in enumerate(estimators):
        xs, ys, lows, highs = [], [], [], []
        for i, agent in enumerate(agents):
            match = [r for r in rows if r["agent"] == agent and r["estimator"] == name]
            if not match:
                continue
            (r,) = match
            x = i - group_width / 2 + (k + 0.5) * bar_width
            xs.append(x)
            ys.append(float(r["value"]))
            lows.append(float(r["ci_lower"]))
            highs.append(float(r["ci_upper"]))
            backing["bars"].append(
                {
                    "agent": agent,
                    "estimator": name,
                    "value": float(r["value"]),
                    "ci_lower": float(r["ci_lower"]),
                    "ci_upper": float(r["ci_upper"]),
                }
            )
        ax.bar(
            xs, ys, width=bar_width * 0.92,
            label=ESTIMATOR_LABELS.get(name, name),
            color=ESTIMATOR_COLORS.get(name),
        )
        # vlines rather than errorbar yerr: percentile CIs may exclude the
        # point estimate, which errorbar's nonnegative offsets cannot draw.
        ax.vlines(xs, lows, highs, color="black", linewidth=1.0)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(range(len(agents)))
    ax.set_xticklabels(agents)
    ax.set_xlabel("agent")
    ax.set_ylabel("estimated misreporting rate")
    if estimators:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, backing


def save_figure(fig, out_path: str | Path) -> None:
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
