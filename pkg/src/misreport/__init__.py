"""Estimation of feature-misreporting rates from manipulated vs. unmanipulated data."""

from .data import (
    ColumnSchema,
    DatasetRole,
    TabularDataset,
    TRUSTED_AGENT_ID,
    filter_by_agent,
    load_dataset,
    save_dataset,
    split,
)

__version__ = "0.1.0"
