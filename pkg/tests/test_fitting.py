"""Disorder-parameter fitting: recovery, corners, determinism."""

import numpy as np
import pytest

from superburst import ConfigError, PhysicalParams, PulseSpec, TimeGrid
from superburst.cascade import Preparation
from superburst.disorder import DisorderPlan, TruncatedGaussian, average_realizations
from superburst.fitting import (
    FitProblem,
    FitSimConfig,
    TargetTrace,
    fit_disorder_params,
)

GRID = TimeGrid(-4.0, 50.0, 0.05, 0.25).build()
SEED = 1234
N_ATOMS = 64
SIM = FitSimConfig(grid=GRID, gamma=0.032797, n_realizations=6, n_phi=8)


def synthetic_target(beta_mean, beta_std, area, n_atoms=N_ATOMS):
    prep = Preparation.driven(PulseSpec(area=area, duration=4.0))
    plan = DisorderPlan(TruncatedGaussian(beta_mean, beta_std), SIM.n_realizations, SEED)
    params = PhysicalParams(gamma=SIM.gamma, beta_nominal=beta_mean, n_atoms=n_atoms)
    avg = average_realizations(
        params, plan, prep, GRID, SIM.n_phi, compute_eta=False
    )
    return TargetTrace(
        n_atoms=n_atoms,
        prep=prep,
        times=GRID.times_decay,
        p_f=avg.result.p_f[GRID.i_zero :],
    )


def targets_for(beta_mean, beta_std):
    return [
        synthetic_target(beta_mean, beta_std, np.pi),
        synthetic_target(beta_mean, beta_std, 0.6 * np.pi),
    ]


class TestRecovery:
    # common random numbers make the objective vanish exactly at the truth,
    # so the simplex should land within a few percent for distinct truths
    @pytest.mark.parametrize(
        "truth", [(0.0112, 0.0065), (0.02, 0.004), (0.008, 0.012)]
    )
    def test_parameter_recovery(self, truth):
        problem = FitProblem(targets=targets_for(*truth))
        res = fit_disorder_params(problem, SIM, SEED, max_evals=400)
        assert abs(res.beta_mean / truth[0] - 1.0) < 0.05
        assert abs(res.beta_std - truth[1]) < 0.05 * truth[0]

    def test_zero_sigma_corner(self):
        problem = FitProblem(targets=targets_for(0.0112, 0.0))
        res = fit_disorder_params(problem, SIM, SEED, max_evals=400)
        assert res.beta_std < 0.001
        assert abs(res.beta_mean / 0.0112 - 1.0) < 0.05

    def test_zero_target_flagged_degenerate(self):
        zero = TargetTrace(
            n_atoms=16,
            prep=Preparation.driven(PulseSpec(area=np.pi, duration=4.0)),
            times=GRID.times_decay,
            p_f=np.zeros(GRID.times_decay.size),
        )
        sim = FitSimConfig(grid=GRID, gamma=0.032797, n_realizations=2, n_phi=4)
        res = fit_disorder_params(
            FitProblem(targets=[zero]), sim, SEED, max_evals=60
        )
        assert res.degenerate


class TestMechanics:
    def test_objective_deterministic_with_common_random_numbers(self):
        problem = FitProblem(targets=targets_for(0.0112, 0.0065))
        a = fit_disorder_params(problem, SIM, SEED, max_evals=45)
        b = fit_disorder_params(problem, SIM, SEED, max_evals=45)
        assert a.history == b.history

    def test_history_records_every_evaluation(self):
        problem = FitProblem(targets=targets_for(0.0112, 0.0065))
        res = fit_disorder_params(problem, SIM, SEED, max_evals=50)
        assert res.n_evaluations == len(res.history)
        assert res.n_evaluations <= 50 + 3  # simplex may finish its final step

    def test_rejects_out_of_bounds_initial(self):
        problem = FitProblem(targets=targets_for(0.0112, 0.0065))
        with pytest.raises(ConfigError):
            fit_disorder_params(problem, SIM, SEED, initial=(0.5, 0.01))

    def test_rejects_times_off_grid(self):
        tgt = TargetTrace(
            n_atoms=4,
            prep=Preparation.driven(PulseSpec(area=np.pi, duration=4.0)),
            times=np.array([0.123, 4.567]),
            p_f=np.array([1.0, 0.5]),
        )
        with pytest.raises(ConfigError):
            fit_disorder_params(FitProblem(targets=[tgt]), SIM, SEED, max_evals=10)

    def test_rejects_empty_problem(self):
        with pytest.raises(ConfigError):
            FitProblem(targets=[])
