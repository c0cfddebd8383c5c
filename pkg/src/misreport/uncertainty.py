"""Asymptotic variance of the MR ratio and bootstrap confidence intervals.

The ratio g(tau', tau, delta') = (tau' - tau) / delta' has gradient
(1/delta', -1/delta', (tau - tau')/delta'^2); with effect covariance S the
asymptotic variance is grad S grad' and the estimator variance grad S grad'/n.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import BootstrapDegeneracyError, MatrixError, MisreportError, ZeroDenominatorError
from .estimators import PluginEffects

#: (row/column order of EffectCovariance.matrix)
EFFECT_ORDER = ("tau_prime", "tau", "delta_prime")


@dataclass(frozen=True)
class EffectCovariance:
    """3x3 covariance of (tau'_a, tau_a, delta'_a), with the n used to scale it."""

    matrix: np.ndarray
    sample_count: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise MatrixError(f"expected a 3x3 matrix, got {m.shape}")
        if np.max(np.abs(m - m.T)) > 1e-12:
            raise MatrixError("covariance matrix is not symmetric within 1e-12")
        if np.min(np.diag(m)) < 0.0:
            raise MatrixError("covariance matrix has a negative diagonal entry")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def var_tau_prime(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def var_tau(self) -> float:
        return float(self.matrix[1, 1])

    @property
    def var_delta_prime(self) -> float:
        return float(self.matrix[2, 2])


def delta_variance(effects: PluginEffects, cov: EffectCovariance) -> float:
    """Estimator variance of the MR ratio at the plug-in effects.

    Expanded form of grad S grad' / n:

        [s2_tau' + s2_tau - 2 s_tau'tau] / d'^2
      + 2 (tau - tau') (s_tau'd' - s_taud') / d'^3
      + (tau - tau')^2 s2_d' / d'^4,    all divided by n.
    """
    d = effects.delta_prime_hat
    if d == 0.0:
        raise ZeroDenominatorError("delta' is zero; the ratio variance is undefined")
    eig_min = float(np.linalg.eigvalsh(cov.matrix)[0])
    if eig_min < -1e-8:
        raise MatrixError(f"covariance matrix is not PSD (min eigenvalue {eig_min:.3g})")
    S = cov.matrix
    diff = effects.tau_hat - effects.tau_prime_hat
    var = (
        (S[0, 0] + S[1, 1] - 2.0 * S[0, 1]) / d**2
        + 2.0 * diff * (S[0, 2] - S[1, 2]) / d**3
        + diff**2 * S[2, 2] / d**4
    )
    return var / cov.sample_count


class BootstrapMode(Enum):
    EVAL_ONLY = "eval"
    FULL_REFIT = "refit"


@dataclass(frozen=True)
class ResamplePipeline:
    """Replayable estimation closure for the bootstrap.

    ``fn(d_indices, dstar_indices)`` must recompute the estimate from the
    given row indices and return ``(value, effects-or-None)``. In EvalOnly
    mode ``d_indices`` indexes the evaluation rows of D and ``dstar_indices``
    is None (models stay fixed); in FullRefit mode ``d_indices`` indexes all
    of D and ``dstar_indices`` all of D*, and the closure re-splits and refits
    everything.
    """

    n_d: int
    n_star: int
    fn: Callable[[np.ndarray | None, np.ndarray | None], tuple[float, PluginEffects | None]]


def bootstrap(
    pipeline: ResamplePipeline,
    B: int,
    level: float = 0.95,
    seed: int = 0,
    mode: BootstrapMode = BootstrapMode.EVAL_ONLY,
) -> tuple[tuple[float, float], EffectCovariance | None]:
    """Percentile CI over B resampled estimates.

    Each resample derives its generator from (seed, resample index, attempt)
    so resamples are independent and order-insensitive; a resample whose
    estimator fails (empty stratum, zero denominator) is redrawn, with at most
    3B draws in total. Returns the (lower, upper) percentile interval and,
    when the pipeline reports effects, their empirical covariance across
    resamples scaled by the evaluation-set size.
    """
    if B < 2:
        raise BootstrapDegeneracyError("B must be at least 2")
    if not 0.0 < level < 1.0:
        raise BootstrapDegeneracyError(f"level must be in (0,1), got {level}")
    values = np.empty(B)
    effect_rows = np.empty((B, 3))
    have_effects = True
    draws_left = 3 * B
    for b in range(B):
        attempt = 0
        while True:
            if draws_left == 0:
                raise BootstrapDegeneracyError(
                    f"bootstrap exhausted {3 * B} draws before completing {B} resamples"
                )
            draws_left -= 1
            rng = np.random.default_rng(np.random.SeedSequence((seed, b, attempt)))
            d_idx = rng.integers(0, pipeline.n_d, pipeline.n_d)
            star_idx = (
                rng.integers(0, pipeline.n_star, pipeline.n_star)
                if mode is BootstrapMode.FULL_REFIT
                else None
            )
            try:
                value, effects = pipeline.fn(d_idx, star_idx)
            except MisreportError:
                attempt += 1
                continue
            values[b] = value
            if effects is None:
                have_effects = False
            else:
                effect_rows[b] = (
                    effects.tau_prime_hat,
                    effects.tau_hat,
                    effects.delta_prime_hat,
                )
            break

    lo, hi = np.percentile(values, [(1 - level) / 2 * 100, (1 + level) / 2 * 100])
    cov = None
    if have_effects:
        raw = np.cov(effect_rows, rowvar=False, ddof=1) * pipeline.n_d
        cov = EffectCovariance((raw + raw.T) / 2.0, sample_count=pipeline.n_d)
    return (float(lo), float(hi)), cov
