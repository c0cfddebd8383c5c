"""Dataset model, CSV ingestion, deterministic splitting, and agent filtering.

A :class:`TabularDataset` is the unit every estimator consumes: an immutable
columnar table holding covariates, a binary feature column (reported X or
true X* depending on role), a binary outcome, and optionally an agent id
column and a ground-truth feature column (simulated data only).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import RoleError, SchemaError, SizeError, ValidationError

#: Agent id reserved for the trustworthy (unmanipulated) side of a fused dataset.
TRUSTED_AGENT_ID = "trusted"

#: Covariates are expected pre-normalized; values beyond this trigger a warning.
_COVARIATE_WARN_RANGE = (-10.0, 10.0)


class DatasetRole(Enum):
    MANIPULATED = "manipulated"
    UNMANIPULATED = "unmanipulated"


@dataclass(frozen=True)
class ColumnSchema:
    """Maps canonical roles to CSV column names.

    ``covariates=None`` selects every column with the ``c_`` prefix.
    """

    feature: str = "x"
    outcome: str = "y"
    agent: str | None = None
    true_feature: str | None = None
    covariates: tuple[str, ...] | None = None


@dataclass(frozen=True)
class TabularDataset:
    """Immutable columnar table of (covariates, feature, outcome[, agent, x*])."""

    covariates: np.ndarray
    covariate_names: tuple[str, ...]
    feature: np.ndarray
    outcome: np.ndarray
    role: DatasetRole
    agent: np.ndarray | None = None
    true_feature: np.ndarray | None = None

    def __post_init__(self):
        cov = np.ascontiguousarray(np.asarray(self.covariates, dtype=np.float64))
        if cov.ndim != 2:
            raise ValidationError(f"covariates must be 2-D, got ndim={cov.ndim}")
        n = cov.shape[0]
        if cov.shape[1] != len(self.covariate_names):
            raise SchemaError(
                f"{cov.shape[1]} covariate columns but {len(self.covariate_names)} names"
            )
        feat = _checked_binary(self.feature, "feature", n)
        out = _checked_binary(self.outcome, "outcome", n)
        agent = self.agent
        if agent is not None:
            agent = np.asarray(agent, dtype=object)
            if agent.shape != (n,):
                raise ValidationError("agent column length mismatch")
            if self.role is DatasetRole.UNMANIPULATED:
                raise RoleError("unmanipulated datasets carry no agent column")
            if TRUSTED_AGENT_ID in set(agent):
                raise ValidationError(
                    f"reserved agent id {TRUSTED_AGENT_ID!r} in manipulated data"
                )
        true_feat = self.true_feature
        if true_feat is not None:
            true_feat = _checked_binary(true_feat, "true_feature", n)
            # Optimal-misreporting assumption: a true 1 is always reported as 1.
            bad = np.nonzero((true_feat == 1) & (feat == 0))[0]
            if bad.size:
                raise ValidationError(
                    f"true_feature=1 but feature=0 at row {bad[0]}"
                )
        if not np.isfinite(cov).all():
            raise ValidationError("non-finite covariate value")
        lo, hi = _COVARIATE_WARN_RANGE
        if cov.size and (cov.min() < lo or cov.max() > hi):
            warnings.warn(
                f"covariates outside [{lo}, {hi}]; they are expected pre-normalized",
                stacklevel=2,
            )
        for name, arr in (
            ("covariates", cov),
            ("feature", feat),
            ("outcome", out),
            ("agent", agent),
            ("true_feature", true_feat),
        ):
            if arr is not None:
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    def agents(self) -> tuple:
        """Distinct agent ids in row-stable sorted order."""
        if self.agent is None:
            raise RoleError("dataset has no agent column")
        return tuple(sorted(set(self.agent)))

    def take(self, indices: np.ndarray) -> "TabularDataset":
        """Row subset (or reordering) by integer indices."""
        idx = np.asarray(indices)
        return TabularDataset(
            covariates=self.covariates[idx],
            covariate_names=self.covariate_names,
            feature=self.feature[idx],
            outcome=self.outcome[idx],
            role=self.role,
            agent=None if self.agent is None else self.agent[idx],
            true_feature=None if self.true_feature is None else self.true_feature[idx],
        )

    def select_covariates(self, names: Sequence[str]) -> "TabularDataset":
        """Keep only the named covariate columns (order as given)."""
        missing = [c for c in names if c not in self.covariate_names]
        if missing:
            raise SchemaError(f"unknown covariate column(s): {missing}")
        cols = [self.covariate_names.index(c) for c in names]
        return replace(
            self,
            covariates=self.covariates[:, cols],
            covariate_names=tuple(names),
        )


def _checked_binary(values, name: str, n: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n,):
        raise ValidationError(f"{name} column length mismatch")
    bad = np.nonzero((arr != 0.0) & (arr != 1.0))[0]
    if bad.size:
        raise ValidationError(
            f"{name} value {arr[bad[0]]!r} outside {{0,1}} at row {bad[0]}"
        )
    return arr


def load_dataset(
    path: str | Path,
    role: DatasetRole,
    schema: ColumnSchema = ColumnSchema(),
) -> TabularDataset:
    """Load a CSV into a validated :class:`TabularDataset`.

    Any missing or non-numeric cell rejects the whole file; the paper's data
    model has no missingness and silent imputation would corrupt the causal
    estimates downstream.
    """
    path = Path(path)
    frame = pd.read_csv(path, encoding="utf-8")
    for col, mapped in (("feature", schema.feature), ("outcome", schema.outcome)):
        if mapped not in frame.columns:
            raise SchemaError(f"missing {col} column {mapped!r} in {path.name}")
    if schema.covariates is None:
        cov_names = tuple(c for c in frame.columns if c.startswith("c_"))
    else:
        cov_names = tuple(schema.covariates)
        missing = [c for c in cov_names if c not in frame.columns]
        if missing:
            raise SchemaError(f"missing covariate column(s) {missing} in {path.name}")
    if schema.agent is not None and schema.agent not in frame.columns:
        raise SchemaError(f"missing agent column {schema.agent!r} in {path.name}")
    if schema.true_feature is not None and schema.true_feature not in frame.columns:
        raise SchemaError(
            f"missing true-feature column {schema.true_feature!r} in {path.name}"
        )
    if schema.agent is not None and role is DatasetRole.UNMANIPULATED:
        raise RoleError("agent column mapped for an unmanipulated dataset")

    if len(frame) < 1:
        raise SizeError(f"{path.name} has no data rows")

    numeric_cols = [schema.feature, schema.outcome, *cov_names]
    if schema.true_feature is not None:
        numeric_cols.append(schema.true_feature)
    numeric = frame[numeric_cols].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna()
    if bad.to_numpy().any():
        row = int(np.nonzero(bad.to_numpy().any(axis=1))[0][0])
        col = bad.columns[np.nonzero(bad.to_numpy()[row])[0][0]]
        raise ValidationError(
            f"missing or non-numeric cell at row {row}, column {col!r} in {path.name}"
        )

    return TabularDataset(
        covariates=numeric[list(cov_names)].to_numpy(dtype=np.float64)
        if cov_names
        else np.empty((len(frame), 0)),
        covariate_names=cov_names,
        feature=numeric[schema.feature].to_numpy(),
        outcome=numeric[schema.outcome].to_numpy(),
        role=role,
        agent=frame[schema.agent].astype(str).to_numpy(dtype=object)
        if schema.agent is not None
        else None,
        true_feature=numeric[schema.true_feature].to_numpy()
        if schema.true_feature is not None
        else None,
    )


def save_dataset(ds: TabularDataset, path: str | Path) -> None:
    """Write a dataset as CSV with canonical column names (round-trip exact)."""
    cols: dict[str, np.ndarray] = {}
    for i, name in enumerate(ds.covariate_names):
        cols[name] = ds.covariates[:, i]
    cols["x"] = ds.feature.astype(np.int64)
    cols["y"] = ds.outcome.astype(np.int64)
    if ds.agent is not None:
        cols["a"] = ds.agent
    if ds.true_feature is not None:
        cols["x_star"] = ds.true_feature.astype(np.int64)
    pd.DataFrame(cols).to_csv(path, index=False)


def split(
    ds: TabularDataset, train_fraction: float, seed: int
) -> tuple[TabularDataset, TabularDataset]:
    """Seeded row-level partition into (train, eval).

    ``|train| = round(train_fraction * n)``; the same seed reproduces the
    identical partition, and row order within each part is the shuffled order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0,1), got {train_fraction}")
    if ds.n < 2:
        raise SizeError("need at least 2 rows to split")
    n_train = int(round(train_fraction * ds.n))
    n_train = min(max(n_train, 1), ds.n - 1)
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.take(perm[:n_train]), ds.take(perm[n_train:])


def filter_by_agent(ds: TabularDataset, agent_id: str) -> TabularDataset:
    """Rows of one agent, role and columns preserved; empty for unknown agents.

    Sweep code probes agent sets uniformly, so an unknown agent is not an
    error here; downstream estimators raise when a required stratum is empty.
    """
    if ds.agent is None:
        raise RoleError("dataset has no agent column")
    return ds.take(np.nonzero(ds.agent == agent_id)[0])
