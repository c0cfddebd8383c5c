import numpy as np
import pytest

from misreport.errors import (
    BootstrapDegeneracyError,
    EmptyStratumError,
    MatrixError,
    ZeroDenominatorError,
)
from misreport.estimators import PluginEffects
from misreport.uncertainty import (
    BootstrapMode,
    EffectCovariance,
    ResamplePipeline,
    bootstrap,
    delta_variance,
)


def cov(matrix, n=100):
    return EffectCovariance(np.asarray(matrix, dtype=float), sample_count=n)


class TestEffectCovariance:
    def test_rejects_asymmetric(self):
        m = np.eye(3)
        m[0, 1] = 1e-6
        with pytest.raises(MatrixError):
            cov(m)

    def test_rejects_negative_diagonal(self):
        m = np.eye(3)
        m[1, 1] = -0.1
        with pytest.raises(MatrixError):
            cov(m)


class TestDeltaVariance:
    def test_equal_taus_simple_value(self):
        eff = PluginEffects(0.3, 0.3, 2.0, 50, 50)
        sigma = np.diag([1.0, 1.0, 5.0])  # delta' variance is killed by tau=tau'
        assert delta_variance(eff, cov(sigma, n=100)) == pytest.approx(0.005)

    def test_zero_covariance(self):
        eff = PluginEffects(0.4, 0.3, 0.5, 10, 10)
        assert delta_variance(eff, cov(np.zeros((3, 3)))) == 0.0

    def test_matches_quadratic_form(self):
        # Independent oracle: grad S grad' / n with explicit matrices.
        rng = np.random.default_rng(0)
        for _ in range(25):
            A = rng.normal(size=(3, 3))
            S = A @ A.T
            tau_p, tau, d = rng.normal(size=3)
            d = d if abs(d) > 0.1 else 0.5
            eff = PluginEffects(tau_p, tau, d, 10, 10)
            grad = np.array([1 / d, -1 / d, (tau - tau_p) / d**2])
            expected = float(grad @ S @ grad) / 64
            got = delta_variance(eff, cov(S, n=64))
            assert got == pytest.approx(expected, abs=1e-12, rel=1e-12)

    def test_zero_delta_errors(self):
        with pytest.raises(ZeroDenominatorError):
            delta_variance(PluginEffects(0.4, 0.3, 0.0, 1, 1), cov(np.eye(3)))

    def test_non_psd_errors(self):
        m = np.array([[1.0, 1.5, 0.0], [1.5, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(MatrixError):
            delta_variance(PluginEffects(0.4, 0.3, 0.5, 1, 1), cov(m))

    def test_monte_carlo_ratio_variance(self):
        # Small-scale version of the acceptance check: the delta formula
        # tracks the Monte Carlo variance of the ratio of sample means.
        rng = np.random.default_rng(1)
        mean = np.array([0.40, 0.32, 0.40])
        A = np.array([[0.5, 0.0, 0.0], [0.2, 0.4, 0.0], [0.1, 0.1, 0.5]])
        S = A @ A.T
        n, reps = 2000, 400
        draws = rng.multivariate_normal(mean, S, size=(reps, n))
        means = draws.mean(axis=1)
        ratios = (means[:, 0] - means[:, 1]) / means[:, 2]
        mc_var = ratios.var(ddof=1)
        eff = PluginEffects(*mean, 1, 1)
        dv = delta_variance(eff, cov(S, n=n))
        assert dv == pytest.approx(mc_var, rel=0.35)


def mean_pipeline(values, n_star=10):
    values = np.asarray(values, dtype=float)

    def fn(d_idx, star_idx):
        sample = values[d_idx]
        m = float(sample.mean())
        return m, PluginEffects(m, m / 2, m / 4, len(values), len(values))

    return ResamplePipeline(n_d=len(values), n_star=n_star, fn=fn)


class TestBootstrap:
    def test_constant_pipeline(self):
        pipe = ResamplePipeline(5, 5, lambda d, s: (0.2, None))
        (lo, hi), cov_ = bootstrap(pipe, B=100, level=0.95, seed=0)
        assert (lo, hi) == (0.2, 0.2)
        assert cov_ is None

    def test_same_seed_identical(self):
        rng = np.random.default_rng(2)
        pipe = mean_pipeline(rng.normal(0.2, 0.05, 200))
        a = bootstrap(pipe, B=100, level=0.95, seed=5)
        b = bootstrap(pipe, B=100, level=0.95, seed=5)
        assert a[0] == b[0]
        assert np.array_equal(a[1].matrix, b[1].matrix)

    def test_percentile_convention(self):
        values = np.linspace(0.0, 1.0, 64)
        calls = iter(values)
        pipe = ResamplePipeline(4, 4, lambda d, s: (float(next(calls)), None))
        (lo, hi), _ = bootstrap(pipe, B=64, level=0.95, seed=0)
        assert lo == pytest.approx(np.percentile(values, 2.5))
        assert hi == pytest.approx(np.percentile(values, 97.5))

    def test_endpoint_convergence_in_b(self):
        rng = np.random.default_rng(3)
        pipe = mean_pipeline(rng.normal(0.2, 0.05, 500))
        small = bootstrap(pipe, B=100, level=0.95, seed=7)[0]
        large = bootstrap(pipe, B=1000, level=0.95, seed=7)[0]
        assert abs(small[0] - large[0]) < 0.01
        assert abs(small[1] - large[1]) < 0.01

    def test_covariance_symmetric_psd(self):
        rng = np.random.default_rng(4)
        pipe = mean_pipeline(rng.normal(0.2, 0.05, 300))
        _, cov_ = bootstrap(pipe, B=200, level=0.9, seed=1)
        m = cov_.matrix
        assert np.max(np.abs(m - m.T)) <= 1e-10
        assert np.linalg.eigvalsh(m)[0] >= -1e-10

    def test_retry_then_degeneracy(self):
        attempts = {"n": 0}

        def flaky(d_idx, star_idx):
            attempts["n"] += 1
            if attempts["n"] % 2 == 1:
                raise EmptyStratumError("stratum empty in this resample")
            return 0.3, None

        pipe = ResamplePipeline(5, 5, flaky)
        (lo, hi), _ = bootstrap(pipe, B=10, level=0.9, seed=0)
        assert lo == hi == 0.3

        always_bad = ResamplePipeline(5, 5, lambda d, s: (_ for _ in ()).throw(
            EmptyStratumError("nope")
        ))
        with pytest.raises(BootstrapDegeneracyError):
            bootstrap(always_bad, B=5, level=0.9, seed=0)

    def test_full_refit_passes_star_indices(self):
        seen = []

        def fn(d_idx, star_idx):
            seen.append(star_idx)
            return 0.1, None

        pipe = ResamplePipeline(8, 13, fn)
        bootstrap(pipe, B=3, level=0.9, seed=0, mode=BootstrapMode.FULL_REFIT)
        assert all(s is not None and len(s) == 13 for s in seen)
        bootstrap(pipe, B=3, level=0.9, seed=0, mode=BootstrapMode.EVAL_ONLY)
        assert seen[-1] is None
