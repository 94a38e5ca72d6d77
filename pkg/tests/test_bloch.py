"""Single-atom model: ideal state, pulse construction, Bloch integration."""

import numpy as np
import pytest
from scipy.linalg import expm

from superburst import (
    AtomState,
    ConfigError,
    PhysicalParams,
    PulseSpec,
    SMOOTHED,
    TimeGrid,
    ideal_state,
    make_pulse,
    solve_bloch,
)
from superburst.bloch import StageDrive, integrate_bloch

PARAMS = PhysicalParams(gamma=0.032797, beta_nominal=0.0112)
BETA = 0.0112


def grid_default(t_end=100.0):
    return TimeGrid(-4.0, t_end).build()


class TestIdealState:
    def test_ground(self):
        st = ideal_state(0.0)
        assert st.s == 0.0 and st.p_e == 0.0

    def test_full_inversion(self):
        st = ideal_state(np.pi)
        assert st.p_e == pytest.approx(1.0, abs=1e-15)
        assert abs(st.s) < 1e-15

    def test_half_pulse(self):
        st = ideal_state(np.pi / 2)
        assert st.s == pytest.approx(-0.5j, abs=1e-15)
        assert st.p_e == pytest.approx(0.5, abs=1e-15)

    def test_bloch_ball_equality_for_pure_states(self):
        for area in np.linspace(0.0, 2.0 * np.pi, 17):
            st = ideal_state(area)
            assert abs(st.s) ** 2 <= st.p_e * (1 - st.p_e) + 1e-12


class TestMakePulse:
    def test_zero_area_is_silent(self):
        drive = make_pulse(PulseSpec(area=0.0), PARAMS, grid_default())
        assert np.all(drive.stages == 0.0)

    def test_pi_pulse_flux(self):
        # A = 2 sqrt(beta Gamma) |alpha| T  =>  |alpha|^2 = A^2/(4 beta Gamma T^2)
        drive = make_pulse(PulseSpec(area=np.pi, duration=4.0), PARAMS, grid_default())
        expected = np.pi**2 / (4.0 * BETA * PARAMS.gamma * 16.0)
        flux = np.abs(drive.stages[0, 1]) ** 2
        assert flux == pytest.approx(expected, rel=1e-12)
        assert flux == pytest.approx(419.824, rel=1e-4)

    def test_area_doubles_with_amplitude(self):
        d1 = make_pulse(PulseSpec(area=0.6), PARAMS, grid_default())
        d2 = make_pulse(PulseSpec(area=1.2), PARAMS, grid_default())
        assert np.allclose(d2.stages, 2.0 * d1.stages)

    @pytest.mark.parametrize("shape", ["rectangular", SMOOTHED])
    def test_integrated_area_matches_spec(self, shape):
        grid = grid_default()
        spec = PulseSpec(area=1.3 * np.pi, duration=4.0, shape=shape, ramp_time=0.5)
        drive = make_pulse(spec, PARAMS, grid)
        rabi = 2.0 * np.sqrt(BETA * PARAMS.gamma) * np.abs(drive.stages)
        area = grid.integrate(rabi)
        assert area == pytest.approx(spec.area, rel=1e-6)

    def test_rejects_nonpositive_duration(self):
        with pytest.raises(ConfigError):
            PulseSpec(area=1.0, duration=0.0)

    def test_rejects_pulse_longer_than_window(self):
        grid = TimeGrid(-2.0, 10.0).build()
        with pytest.raises(ConfigError):
            make_pulse(PulseSpec(area=1.0, duration=4.0), PARAMS, grid)

    def test_pulse_off_at_zero(self):
        drive = make_pulse(PulseSpec(area=np.pi, duration=4.0), PARAMS, grid_default())
        assert drive.alpha[drive.grid.i_zero] == 0.0  # right-limit convention


class TestSolveBloch:
    def test_undriven_decay_from_inversion(self):
        grid = grid_default()
        drive = make_pulse(PulseSpec(area=0.0), PARAMS, grid)
        traj, out_c, f_inc = solve_bloch(drive, BETA, PARAMS, ideal_state(np.pi))
        t_rel = grid.nodes - grid.nodes[0]
        pe_exact = np.exp(-PARAMS.gamma * t_rel)
        assert np.abs(traj.p_e / pe_exact - 1.0).max() < 1e-9
        assert np.abs(traj.s).max() < 1e-15
        assert np.abs(out_c).max() < 1e-15
        assert np.abs(f_inc - BETA * PARAMS.gamma * pe_exact).max() < 1e-12

    def test_ground_state_stays_dark(self):
        grid = grid_default()
        drive = make_pulse(PulseSpec(area=0.0), PARAMS, grid)
        traj, out_c, f_inc = solve_bloch(drive, BETA, PARAMS, AtomState.ground())
        assert np.abs(traj.p_e).max() == 0.0
        assert np.abs(out_c).max() == 0.0
        assert np.abs(f_inc).max() == 0.0

    def test_pi_pulse_nearly_inverts(self):
        grid = grid_default()
        drive = make_pulse(PulseSpec(area=np.pi, duration=4.0), PARAMS, grid)
        traj, _, _ = solve_bloch(drive, BETA, PARAMS, AtomState.ground())
        pe_off = traj.p_e[grid.i_zero]
        assert abs(pe_off - 1.0) < 0.05

    def test_driven_matches_matrix_exponential(self):
        # on resonance with a real constant drive the equations are linear in
        # (v, p_e) with v = -2 Im s; the closed form is a matrix exponential,
        # compared here against a high-resolution integration
        grid = TimeGrid(-4.0, 10.0, 0.002, 0.05).build()
        spec = PulseSpec(area=np.pi, duration=4.0)
        drive = make_pulse(spec, PARAMS, grid)
        traj, _, _ = solve_bloch(drive, BETA, PARAMS, AtomState.ground())

        a0 = spec.area / (2.0 * np.sqrt(BETA * PARAMS.gamma) * spec.duration)
        omega = 2.0 * np.sqrt(BETA * PARAMS.gamma) * a0
        gen = np.array(
            [
                [-PARAMS.gamma / 2.0, -2.0 * omega, omega],
                [omega / 2.0, -PARAMS.gamma, 0.0],
                [0.0, 0.0, 0.0],
            ]
        )
        v, pe, _ = expm(gen * spec.duration) @ np.array([0.0, 0.0, 1.0])
        i0 = grid.i_zero
        assert traj.p_e[i0] == pytest.approx(pe, abs=1e-10)
        assert -2.0 * traj.s[i0].imag == pytest.approx(v, abs=1e-10)

    def test_rejects_bad_beta(self):
        grid = grid_default()
        drive = make_pulse(PulseSpec(area=0.0), PARAMS, grid)
        with pytest.raises(ConfigError):
            solve_bloch(drive, 1.5, PARAMS, AtomState.ground())

    def test_rejects_nonfinite_drive(self):
        grid = grid_default()
        stages = np.zeros((grid.n_steps, 3), dtype=complex)
        stages[0, 0] = np.nan
        from superburst.bloch import CoherentDrive

        with pytest.raises(ConfigError):
            CoherentDrive(grid, stages)


class TestInvariants:
    def _random_drive(self, grid, rng, scale):
        smooth = rng.normal(size=4)
        t = grid.stage_times()

        def fn(x):
            return scale * (
                np.sin(0.3 * x + smooth[0])
                + smooth[1] * np.cos(0.17 * x + smooth[2])
                + smooth[3]
            )

        from superburst.bloch import CoherentDrive

        return CoherentDrive(grid, fn(t).astype(complex))

    def test_bloch_ball_and_incoherent_flux(self):
        grid = TimeGrid(-4.0, 40.0).build()
        rng = np.random.default_rng(42)
        for _ in range(8):
            drive = self._random_drive(grid, rng, rng.uniform(0.0, 25.0))
            beta = rng.uniform(0.001, 0.3)
            traj, _, f_inc = solve_bloch(drive, beta, PARAMS, AtomState.ground())
            bound = traj.p_e * (1.0 - traj.p_e)
            assert (np.abs(traj.s) ** 2 - bound).max() < 1e-9
            assert f_inc.min() > -1e-12

    def test_pointwise_energy_balance(self):
        grid = grid_default(60.0)
        drive = make_pulse(PulseSpec(area=1.4 * np.pi, duration=4.0), PARAMS, grid)
        beta = 0.07
        traj, out_c, f_inc = solve_bloch(drive, beta, PARAMS, AtomState.ground())
        alpha = drive.alpha
        p_in = np.abs(alpha) ** 2
        p_out = np.abs(out_c) ** 2 + f_inc
        root_bg = np.sqrt(beta * PARAMS.gamma)
        dpe_dt = -PARAMS.gamma * traj.p_e - 2.0 * root_bg * (
            np.conj(alpha) * traj.s
        ).imag
        resid = p_in - p_out - dpe_dt - (1.0 - beta) * PARAMS.gamma * traj.p_e
        tol = 1e-6 * np.maximum(p_in, PARAMS.gamma)
        assert np.all(np.abs(resid) < tol)

    def test_u1_covariance_exact_quarter_turn(self):
        # multiplication by i is exact in binary floating point, so the
        # covariance holds bit for bit
        grid = grid_default(40.0)
        drive = make_pulse(PulseSpec(area=0.8 * np.pi, duration=4.0), PARAMS, grid)
        traj1, out1, f1 = solve_bloch(drive, BETA, PARAMS, AtomState.ground())
        traj2, out2, f2 = solve_bloch(drive.scaled(1j), BETA, PARAMS, AtomState.ground())
        assert np.array_equal(traj2.s, 1j * traj1.s)
        assert np.array_equal(traj2.p_e, traj1.p_e)
        assert np.array_equal(out2, 1j * out1)
        assert np.array_equal(f2, f1)

    def test_u1_covariance_generic_phase(self):
        grid = grid_default(40.0)
        drive = make_pulse(PulseSpec(area=0.8 * np.pi, duration=4.0), PARAMS, grid)
        phase = np.exp(0.7j)
        traj1, _, _ = solve_bloch(drive, BETA, PARAMS, AtomState.ground())
        traj2, _, _ = solve_bloch(drive.scaled(phase), BETA, PARAMS, AtomState.ground())
        assert np.abs(traj2.s - phase * traj1.s).max() < 1e-13
        assert np.abs(traj2.p_e - traj1.p_e).max() < 1e-13

    def test_halving_dt_converged(self):
        spec = PulseSpec(area=np.pi, duration=4.0)
        sols = {}
        for k, (dtp, dtd) in enumerate([(0.02, 0.1), (0.01, 0.05)]):
            grid = TimeGrid(-4.0, 60.0, dtp, dtd).build()
            drive = make_pulse(spec, PARAMS, grid)
            traj, _, _ = solve_bloch(drive, BETA, PARAMS, AtomState.ground())
            sols[k] = (grid, traj)
        g0, t0 = sols[0]
        g1, t1 = sols[1]
        assert np.allclose(g0.nodes, g1.nodes[::2])
        scale_s = np.abs(t0.s).max()
        assert np.abs(t0.s - t1.s[::2]).max() / scale_s < 1e-6
        assert np.abs(t0.p_e - t1.p_e[::2]).max() / t0.p_e.max() < 1e-6

    def test_step_failure_reported(self):
        # absurdly coarse stepping through a violent pulse breaks the
        # Bloch-ball bound and must be reported, not silently returned
        from superburst.errors import NumericalError

        grid = TimeGrid(-4.0, 10.0, 1.0, 1.0).build()
        drive = make_pulse(PulseSpec(area=40.0 * np.pi, duration=4.0), PARAMS, grid)
        with pytest.raises(NumericalError):
            solve_bloch(drive, 0.5, PARAMS, AtomState.ground())
