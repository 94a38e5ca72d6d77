"""Truncated-Gaussian sampling and realization averaging."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from superburst import ConfigError, PhysicalParams, PulseSpec, TimeGrid
from superburst.cascade import Preparation, propagate_ensemble
from superburst.disorder import (
    DisorderPlan,
    TruncatedGaussian,
    average_realizations,
    sample_betas,
)

DIST = TruncatedGaussian(0.0112, 0.0065)
PARAMS = PhysicalParams(n_atoms=12)


def truncated_mean_quadrature(dist: TruncatedGaussian) -> float:
    """Independent oracle: numerically integrate the truncated density."""
    pdf = lambda x: norm.pdf(x, dist.mean, dist.std)
    z, _ = quad(pdf, 0.0, 1.0)
    m, _ = quad(lambda x: x * pdf(x), 0.0, 1.0)
    return m / z


class TestSampleBetas:
    def test_zero_std_returns_mean(self):
        d = TruncatedGaussian(0.0112, 0.0)
        assert np.all(sample_betas(d, 10, 1) == 0.0112)

    def test_deterministic_per_seed(self):
        a = sample_betas(DIST, 500, (42, 3))
        b = sample_betas(DIST, 500, (42, 3))
        assert np.array_equal(a, b)
        c = sample_betas(DIST, 500, (42, 4))
        assert not np.array_equal(a, c)

    def test_all_in_open_interval(self):
        for r in range(5):
            b = sample_betas(DIST, 2000, (7, r))
            assert b.min() > 0.0 and b.max() < 1.0

    def test_mean_matches_quadrature_oracle(self):
        n = 1_000_000
        draws = sample_betas(DIST, n, 123)
        exact = truncated_mean_quadrature(DIST)
        stderr = draws.std(ddof=1) / np.sqrt(n)
        assert abs(draws.mean() - exact) < 3.0 * stderr

    def test_pathological_acceptance_rejected(self):
        d = TruncatedGaussian(0.5, 1.0e7)
        with pytest.raises(ConfigError):
            sample_betas(d, 10, 0)

    def test_substreams_independent_of_history(self):
        # realization r's draws do not depend on whether r-1 was computed
        fresh = sample_betas(DIST, 100, (99, 5))
        for r in range(5):
            sample_betas(DIST, 100, (99, r))
        again = sample_betas(DIST, 100, (99, 5))
        assert np.array_equal(fresh, again)


class TestAverageRealizations:
    def grid(self):
        return TimeGrid(-4.0, 60.0, 0.05, 0.2).build()

    def prep(self):
        return Preparation.driven(PulseSpec(area=np.pi, duration=4.0))

    def test_single_realization_zero_std_equals_deterministic_run(self):
        grid = self.grid()
        plan = DisorderPlan(TruncatedGaussian(0.0112, 0.0), 1, seed=5)
        avg = average_realizations(PARAMS, plan, self.prep(), grid, 8)
        direct = propagate_ensemble(
            PARAMS, np.full(PARAMS.n_atoms, 0.0112), self.prep(), grid, 8
        )
        assert np.array_equal(avg.result.p_f, direct.p_f)
        assert np.abs(avg.p_f_std).max() == 0.0

    def test_thread_count_invariance(self):
        grid = self.grid()
        plan = DisorderPlan(DIST, 10, seed=21)
        ref = average_realizations(PARAMS, plan, self.prep(), grid, 8, threads=1)
        for threads in (2, 3, 7):
            alt = average_realizations(
                PARAMS, plan, self.prep(), grid, 8, threads=threads
            )
            assert np.array_equal(ref.result.p_f, alt.result.p_f)
            assert np.array_equal(ref.p_f_std, alt.p_f_std)
            assert np.array_equal(ref.p_max_r, alt.p_max_r)

    def test_seed_determinism(self):
        grid = self.grid()
        plan = DisorderPlan(DIST, 6, seed=77)
        a = average_realizations(PARAMS, plan, self.prep(), grid, 8)
        b = average_realizations(PARAMS, plan, self.prep(), grid, 8)
        assert np.array_equal(a.result.p_f, b.result.p_f)

    def test_doubling_realizations_statistically_consistent(self):
        grid = self.grid()
        small = average_realizations(
            PARAMS, DisorderPlan(DIST, 12, seed=4), self.prep(), grid, 8
        )
        big = average_realizations(
            PARAMS, DisorderPlan(DIST, 24, seed=4), self.prep(), grid, 8
        )
        se = small.p_max_r.std(ddof=1) / np.sqrt(small.n_realizations)
        assert abs(small.p_max_r.mean() - big.p_max_r.mean()) < 2.0 * se

    def test_mean_field_energy_books_balance(self):
        from superburst.cascade import energy_ledger

        grid = self.grid()
        plan = DisorderPlan(DIST, 8, seed=2)
        avg = average_realizations(PARAMS, plan, self.prep(), grid, 8)
        led = energy_ledger(avg.result, PARAMS)
        tol = 1e-6 * max(avg.result.input_power.max(), PARAMS.gamma)
        assert led.max_pointwise < tol
