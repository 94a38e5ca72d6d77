"""Single-atom dynamics: resonant optical Bloch equations and input-output.

In the rotating frame of the resonant drive, with s = <sigma> and
p_e = <sigma^dag sigma>, a classical (coherent-state) drive amplitude
a(t) in sqrt(photons/ns) gives

    ds/dt  = -Gamma/2 * s - i sqrt(beta*Gamma) (1 - 2 p_e) a(t)
    dpe/dt = -Gamma * p_e - 2 sqrt(beta*Gamma) Im[conj(a) s]

The guided field leaving the atom is

    a_out(t) = a(t) - i sqrt(beta*Gamma) s(t)

with coherent flux |a_out|^2 and incoherent flux
beta*Gamma (p_e - |s|^2); the total output flux simplifies to
|a|^2 + 2 sqrt(beta*Gamma) Im[conj(a) s] + beta*Gamma p_e.

The sign convention is fixed so that a resonant pulse of area
A = int 2 sqrt(beta*Gamma) |a| dt starting from the ground state
prepares exactly s = -(i/2) sin A, p_e = sin^2(A/2) in the
instantaneous-pulse limit.

The integrator is classical fixed-step RK4, batched over arbitrary
leading array dimensions, with drive values taken from per-step stage
samples (see grid.py). Midpoint states are reconstructed with cubic
Hermite dense output, which keeps the cascaded atom-to-atom propagation
globally fourth order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .grid import StepGrid
from .params import AtomState, PhysicalParams, PulseSpec, RECTANGULAR, SMOOTHED

BLOCH_BALL_TOL = 1e-9


def ideal_state(area: float) -> AtomState:
    """Pure-state expectations after an instantaneous pulse of given area."""
    if not np.isfinite(area):
        raise ConfigError(f"pulse area must be finite, got {area}")
    return AtomState(-0.5j * np.sin(area), float(np.sin(0.5 * area) ** 2))


@dataclass(frozen=True)
class CoherentDrive:
    """Classical drive amplitude sampled on integrator stages.

    stages has shape (..., n_steps, 3) holding one-sided limits at the
    left node, midpoint, and right node of every step; units are
    sqrt(photons/ns). The node-resolution view uses right limits, so the
    value reported at t = 0 is the post-pulse one.
    """

    grid: StepGrid
    stages: np.ndarray

    def __post_init__(self) -> None:
        if self.stages.shape[-2:] != (self.grid.n_steps, 3):
            raise ConfigError("drive stage array does not match the grid")
        if not np.isfinite(self.stages).all():
            raise ConfigError("drive contains non-finite values")

    @property
    def alpha(self) -> np.ndarray:
        return self.grid.node_values(self.stages)

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def scaled(self, factor: complex) -> "CoherentDrive":
        return CoherentDrive(self.grid, self.stages * factor)


@dataclass(frozen=True)
class AtomTrajectory:
    """Time series of one atom's dipole and population on the grid nodes."""

    grid: StepGrid
    s: np.ndarray
    p_e: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes


def make_pulse(spec: PulseSpec, params: PhysicalParams, grid: StepGrid) -> CoherentDrive:
    """Build the excitation pulse drive on the grid.

    The amplitude is normalized so the nominal Rabi angle
    int 2 sqrt(beta_nominal * Gamma) |a(t)| dt equals spec.area. The
    pulse occupies [-duration, 0] and must fit inside the grid's t <= 0
    segment; the phase is constant, real and positive.
    """
    t0 = -spec.duration
    if grid.spec.t_start > t0 + 1e-12:
        raise ConfigError(
            f"pulse of duration {spec.duration} ns does not fit in "
            f"[{grid.spec.t_start}, 0]"
        )
    root_bg = np.sqrt(params.beta_nominal * params.gamma)
    stages = np.zeros((grid.n_steps, 3))
    if spec.area > 0.0:
        if spec.shape == RECTANGULAR:
            a0 = spec.area / (2.0 * root_bg * spec.duration)
            eps = 1e-9 * spec.duration
            left, mid, right = grid.nodes[:-1], grid.mids, grid.nodes[1:]
            stages[:, 0] = np.where((left >= t0 - eps) & (left < -eps), a0, 0.0)
            stages[:, 1] = np.where((mid > t0) & (mid < 0.0), a0, 0.0)
            stages[:, 2] = np.where((right > t0 + eps) & (right <= eps), a0, 0.0)
        else:  # SMOOTHED: raised-cosine ramps, flat top in between
            ramp = spec.ramp_time
            a0 = spec.area / (2.0 * root_bg * (spec.duration - ramp))

            def env(t):
                up = 0.5 * (1.0 - np.cos(np.pi * (t - t0) / ramp))
                down = 0.5 * (1.0 - np.cos(np.pi * (-t) / ramp))
                flat = np.ones_like(t)
                val = np.where(t < t0 + ramp, up, np.where(t > -ramp, down, flat))
                return a0 * np.where((t > t0) & (t < 0.0), val, 0.0)

            stages = grid.sample_stages(env)
    return CoherentDrive(grid, stages.astype(np.complex128))


class StageDrive:
    """Drive provider backed by a plain stage array (may broadcast)."""

    def __init__(self, stages: np.ndarray):
        self.stages = stages

    def at(self, n: int, j: int) -> np.ndarray:
        return self.stages[..., n, j]


class MixedStageDrive:
    """Per-phase drive alpha_c(t) + exp(i phi) sqrt(f_inc(t)).

    Adds a trailing phase axis of length len(phases) to the batch.
    """

    def __init__(self, alpha_c: np.ndarray, sqrt_f: np.ndarray, phases: np.ndarray):
        self.alpha_c = alpha_c
        self.sqrt_f = sqrt_f
        self.phases = phases

    def at(self, n: int, j: int) -> np.ndarray:
        return self.alpha_c[..., None, n, j] + self.sqrt_f[..., None, n, j] * self.phases


@dataclass
class BlochRun:
    """Raw integrator output (batched; phase axis possibly averaged out)."""

    grid: StepGrid
    s_nodes: np.ndarray
    pe_nodes: np.ndarray
    pe_stages: np.ndarray
    dpe_dt_nodes: np.ndarray
    out_alpha_stages: np.ndarray
    out_total_stages: np.ndarray


def integrate_bloch(
    grid: StepGrid,
    drive,
    beta,
    gamma: float,
    s0,
    pe0,
    phi_average: bool = False,
    bloch_tol: float = BLOCH_BALL_TOL,
) -> BlochRun:
    """RK4 integration of the Bloch equations over the grid.

    drive is a StageDrive or MixedStageDrive; beta, s0, pe0 broadcast
    against the batch shape (the trailing axis is the phase axis when a
    MixedStageDrive is used). With phi_average=True the trajectory and
    the output-field statistics are averaged over that trailing axis;
    the output coherent amplitude is then the phase-mean of a_out and
    the output total flux the phase-mean of per-phase total flux.

    Raises NumericalError if the Bloch-ball bound |s|^2 <= p_e(1 - p_e)
    is violated beyond bloch_tol at any step (step size too large).
    """
    h_arr = grid.h
    n_steps = grid.n_steps
    beta = np.asarray(beta, dtype=np.float64)
    root_bg = np.sqrt(beta * gamma)
    bg = beta * gamma

    probe = drive.at(0, 0)
    batch = np.broadcast_shapes(
        np.shape(s0), np.shape(pe0), beta.shape, np.shape(probe)
    )
    s = np.empty(batch, dtype=np.complex128)
    pe = np.empty(batch, dtype=np.float64)
    s[...] = s0
    pe[...] = pe0

    out_batch = batch[:-1] if phi_average else batch
    n_phi = batch[-1] if (phi_average and batch) else 1

    s_nodes = np.empty(out_batch + (n_steps + 1,), dtype=np.complex128)
    pe_nodes = np.empty(out_batch + (n_steps + 1,), dtype=np.float64)
    pe_stages = np.empty(out_batch + (n_steps, 3), dtype=np.float64)
    dpe_nodes = np.empty(out_batch + (n_steps + 1,), dtype=np.float64)
    out_alpha = np.empty(out_batch + (n_steps, 3), dtype=np.complex128)
    out_total = np.empty(out_batch + (n_steps, 3), dtype=np.float64)

    def reduce(x):
        return x.mean(axis=-1) if phi_average else x

    def rhs(s_, pe_, a):
        im = (np.conj(a) * s_).imag
        ds = -0.5 * gamma * s_ - (1j) * (root_bg * (1.0 - 2.0 * pe_)) * a
        dpe = -gamma * pe_ - 2.0 * root_bg * im
        return ds, dpe, im

    def emit(n, j, s_, pe_, a, im):
        a_out = a - 1j * root_bg * s_
        total = np.abs(a) ** 2 + 2.0 * root_bg * im + bg * pe_
        out_alpha[..., n, j] = reduce(np.broadcast_to(a_out, batch))
        out_total[..., n, j] = reduce(np.broadcast_to(total, batch))
        pe_stages[..., n, j] = reduce(np.broadcast_to(pe_, batch))

    s_nodes[..., 0] = reduce(s)
    pe_nodes[..., 0] = reduce(pe)

    for n in range(n_steps):
        h = h_arr[n]
        aL = drive.at(n, 0)
        aM = drive.at(n, 1)
        aR = drive.at(n, 2)

        k1s, k1p, imL = rhs(s, pe, aL)
        k2s, k2p, _ = rhs(s + (0.5 * h) * k1s, pe + (0.5 * h) * k1p, aM)
        k3s, k3p, _ = rhs(s + (0.5 * h) * k2s, pe + (0.5 * h) * k2p, aM)
        k4s, k4p, _ = rhs(s + h * k3s, pe + h * k3p, aR)

        s_new = s + (h / 6.0) * (k1s + 2.0 * (k2s + k3s) + k4s)
        pe_new = pe + (h / 6.0) * (k1p + 2.0 * (k2p + k3p) + k4p)

        fRs, fRp, imR = rhs(s_new, pe_new, aR)
        s_mid = 0.5 * (s + s_new) + (h / 8.0) * (k1s - fRs)
        pe_mid = 0.5 * (pe + pe_new) + (h / 8.0) * (k1p - fRp)
        _, _, imM = rhs(s_mid, pe_mid, aM)

        dpe_nodes[..., n] = reduce(np.broadcast_to(k1p, batch))
        emit(n, 0, s, pe, aL, imL)
        emit(n, 1, s_mid, pe_mid, aM, imM)
        emit(n, 2, s_new, pe_new, aR, imR)

        s, pe = s_new, pe_new
        v = float((np.abs(s) ** 2 - pe * (1.0 - pe)).max())
        if v > bloch_tol:
            raise NumericalError(
                f"Bloch-ball bound violated by {v:.3e} at t = "
                f"{grid.nodes[n + 1]:.4g} ns; reduce the time step"
            )
        s_nodes[..., n + 1] = reduce(s)
        pe_nodes[..., n + 1] = reduce(pe)

    dpe_nodes[..., n_steps] = reduce(np.broadcast_to(fRp, batch))
    return BlochRun(grid, s_nodes, pe_nodes, pe_stages, dpe_nodes, out_alpha, out_total)


def solve_bloch(
    drive: CoherentDrive,
    beta: float,
    params: PhysicalParams,
    init: AtomState,
):
    """Drive one atom with a classical coherent field.

    Returns (trajectory, out_coherent, out_incoherent_flux) where
    out_coherent is a(t) - i sqrt(beta*Gamma) s(t) and the incoherent
    flux is beta*Gamma (p_e - |s|^2), both on the grid nodes.
    """
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must lie in [0, 1], got {beta}")
    run = integrate_bloch(
        drive.grid, StageDrive(drive.stages), beta, params.gamma, init.s, init.p_e
    )
    traj = AtomTrajectory(drive.grid, run.s_nodes, run.pe_nodes)
    out_coherent = drive.grid.node_values(run.out_alpha_stages)
    f_inc = beta * params.gamma * (run.pe_nodes - np.abs(run.s_nodes) ** 2)
    return traj, out_coherent, f_inc
