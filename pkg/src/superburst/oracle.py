"""Exact cascaded Lindblad master equation for small atom numbers.

Ground truth for validating the linear-cost mixed-coherent-state model.
With L_k = -i sqrt(beta_k Gamma) sigma_k the unidirectional input-output
relation a_{k+1} = a_k - i sqrt(beta_k Gamma) sigma_k composes (series
product of the chain) into

    d rho/dt = -i [H_casc + H_drive(t), rho]
               + D[J] rho + sum_k (1 - beta_k) Gamma D[sigma_k] rho

    J       = sum_k sqrt(beta_k Gamma) sigma_k
    H_casc  = (i Gamma / 2) sum_{j<k} sqrt(beta_j beta_k)
              (sigma_j^dag sigma_k - sigma_k^dag sigma_j)

A coherent drive alpha(t) entering the first atom's input displaces the
collective channel, H_drive = sum_k sqrt(beta_k Gamma)
(conj(alpha) sigma_k + alpha sigma_k^dag), whose single-atom reduction
is exactly the optical Bloch drive used by the cascade model. The
forward flux is <J^dag J> plus the transmitted-drive interference terms,
and the free-space flux sum_k (1 - beta_k) Gamma <sigma_k^dag sigma_k>.

Dense matrices only; the Hilbert-space dimension 2^N caps N at 8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bloch import CoherentDrive, ideal_state
from .cascade import Preparation, propagate_ensemble
from .errors import ConfigError, NumericalError
from .grid import StepGrid
from .observables import peak_and_delay
from .params import PhysicalParams

MAX_ATOMS = 8

TRACE_TOL = 1e-9
HERMITICITY_TOL = 1e-9
EIGENVALUE_TOL = 1e-8
POSITIVITY_ABORT = 1e-6

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)  # |g><e|


def atom_lowering_ops(n_atoms: int) -> list[np.ndarray]:
    """Dense sigma_k acting on atom k of the N-atom product space."""
    eye = np.eye(2, dtype=np.complex128)
    ops = []
    for k in range(n_atoms):
        op = np.array([[1.0 + 0.0j]])
        for j in range(n_atoms):
            op = np.kron(op, _SIGMA if j == k else eye)
        ops.append(op)
    return ops


def product_state(n_atoms: int, area: float) -> np.ndarray:
    """Density matrix of the ideal product state at pulse area `area`."""
    st = ideal_state(area)
    amp_g = np.sqrt(max(1.0 - st.p_e, 0.0))
    single = np.array([amp_g, -1j * np.sin(0.5 * area)], dtype=np.complex128)
    psi = np.array([1.0 + 0.0j])
    for _ in range(n_atoms):
        psi = np.kron(psi, single)
    return np.outer(psi, psi.conj())


def validate_density_matrix(rho: np.ndarray, context: str = "") -> None:
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericalError(f"density matrix trace drifted to {tr} {context}")
    if np.abs(rho - rho.conj().T).max() > HERMITICITY_TOL:
        raise NumericalError(f"density matrix lost Hermiticity {context}")
    w = np.linalg.eigvalsh(rho)
    if w.min() < -POSITIVITY_ABORT:
        raise NumericalError(
            f"density matrix positivity violated ({w.min():.2e}) {context}; "
            "reduce the time step"
        )


@dataclass
class CascadedGenerator:
    """Precomputed operators of the cascaded Lindblad generator."""

    n_atoms: int
    betas: np.ndarray
    gamma: float
    sigmas: list[np.ndarray]
    j_op: np.ndarray
    h_casc: np.ndarray
    number_ops: list[np.ndarray] = field(repr=False, default_factory=list)
    drive: Optional[CoherentDrive] = None

    def __post_init__(self) -> None:
        self._j_dag = self.j_op.conj().T
        free_rates = (1.0 - self.betas) * self.gamma
        self._free_rates = free_rates
        # anti-commutator part of D[J] and all free-space dissipators
        acc = 0.5 * (self._j_dag @ self.j_op)
        for r, n_op in zip(free_rates, self.number_ops):
            acc = acc + 0.5 * r * n_op
        self._anti = acc
        root = np.sqrt(self.betas * self.gamma)
        self._drive_op = sum(r * s for r, s in zip(root, self.sigmas))

    def rhs(self, rho: np.ndarray, alpha: complex) -> np.ndarray:
        h = self.h_casc
        if alpha != 0.0:
            h = h + (
                np.conj(alpha) * self._drive_op
                + alpha * self._drive_op.conj().T
            )
        out = -1j * (h @ rho - rho @ h)
        out += self.j_op @ rho @ self._j_dag
        out -= self._anti @ rho + rho @ self._anti
        for r, s in zip(self._free_rates, self.sigmas):
            if r > 0.0:
                out += r * (s @ rho @ s.conj().T)
        return out

    def forward_power(self, rho: np.ndarray, alpha: complex) -> float:
        """<a_out^dag a_out> of the guided mode leaving the last atom."""
        p = np.trace(self._j_dag @ self.j_op @ rho).real
        if alpha != 0.0:
            j_mean = np.trace(rho @ self.j_op)
            p += abs(alpha) ** 2 + 2.0 * np.real(np.conj(alpha) * (-1j) * j_mean)
        return float(p)

    def coherent_amplitude(self, rho: np.ndarray, alpha: complex) -> complex:
        return alpha - 1j * np.trace(rho @ self.j_op)

    def free_power(self, rho: np.ndarray) -> float:
        return float(
            sum(
                r * np.trace(n_op @ rho).real
                for r, n_op in zip(self._free_rates, self.number_ops)
            )
        )

    def populations(self, rho: np.ndarray) -> np.ndarray:
        return np.array(
            [np.trace(n_op @ rho).real for n_op in self.number_ops]
        )


def build_generator(
    n_atoms: int,
    beta,
    params: PhysicalParams,
    drive: Optional[CoherentDrive] = None,
    max_atoms: int = MAX_ATOMS,
) -> CascadedGenerator:
    """Assemble the cascaded generator for n_atoms two-level emitters."""
    if n_atoms < 1:
        raise ConfigError("need at least one atom")
    if n_atoms > max_atoms:
        raise ConfigError(
            f"oracle limited to {max_atoms} atoms (dimension 2^N); got {n_atoms}"
        )
    betas = np.broadcast_to(np.asarray(beta, dtype=np.float64), (n_atoms,)).copy()
    if np.any(betas <= 0.0) or np.any(betas >= 1.0):
        raise ConfigError("oracle couplings must lie in (0, 1)")
    gamma = params.gamma
    sigmas = atom_lowering_ops(n_atoms)
    root = np.sqrt(betas * gamma)
    j_op = sum(r * s for r, s in zip(root, sigmas))
    dim = 2 ** n_atoms
    h_casc = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(n_atoms):
        for k in range(j + 1, n_atoms):
            sjd_sk = sigmas[j].conj().T @ sigmas[k]
            h_casc += 0.5j * root[j] * root[k] * (sjd_sk - sjd_sk.conj().T)
    number_ops = [s.conj().T @ s for s in sigmas]
    return CascadedGenerator(
        n_atoms=n_atoms,
        betas=betas,
        gamma=gamma,
        sigmas=sigmas,
        j_op=j_op,
        h_casc=h_casc,
        number_ops=number_ops,
        drive=drive,
    )


@dataclass
class OracleResult:
    """Exact evolution: forward/free fluxes and per-atom populations."""

    grid: StepGrid
    p_f_stages: np.ndarray
    free_stages: np.ndarray
    alpha_out: np.ndarray
    populations: np.ndarray  # (n_atoms, n_nodes)
    rho_final: np.ndarray

    @property
    def p_f(self) -> np.ndarray:
        return self.grid.node_values(self.p_f_stages)

    @property
    def free_power(self) -> np.ndarray:
        return self.grid.node_values(self.free_stages)

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes


def evolve(
    gen: CascadedGenerator,
    rho0: np.ndarray,
    grid: StepGrid,
    check_every: int = 25,
) -> OracleResult:
    """Fixed-step RK4 evolution of the density matrix.

    Observables are recorded on the integrator stages (midpoints via
    cubic Hermite dense output) so energy integrals carry the full
    integrator accuracy. State-validity checks (trace, Hermiticity,
    positivity) run every check_every steps and on the final state.
    """
    rho = np.array(rho0, dtype=np.complex128)
    validate_density_matrix(rho, "(initial state)")
    m = grid.n_steps
    if gen.drive is not None:
        stages = np.broadcast_to(gen.drive.stages, (m, 3))
    else:
        stages = np.zeros((m, 3), dtype=np.complex128)

    p_f = np.empty((m, 3))
    p_free = np.empty((m, 3))
    alpha_out = np.empty(m + 1, dtype=np.complex128)
    pops = np.empty((gen.n_atoms, m + 1))

    def record_node(i, rho_, a):
        alpha_out[i] = gen.coherent_amplitude(rho_, a)
        pops[:, i] = gen.populations(rho_)

    def record_stage(n, j, rho_, a):
        p_f[n, j] = gen.forward_power(rho_, a)
        p_free[n, j] = gen.free_power(rho_)

    record_node(0, rho, complex(stages[0, 0]))
    for n in range(m):
        h = grid.h[n]
        a_l, a_m, a_r = (complex(stages[n, j]) for j in range(3))
        k1 = gen.rhs(rho, a_l)
        k2 = gen.rhs(rho + (0.5 * h) * k1, a_m)
        k3 = gen.rhs(rho + (0.5 * h) * k2, a_m)
        k4 = gen.rhs(rho + h * k3, a_r)
        rho_new = rho + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        f_r = gen.rhs(rho_new, a_r)
        rho_mid = 0.5 * (rho + rho_new) + (h / 8.0) * (k1 - f_r)

        record_stage(n, 0, rho, a_l)
        record_stage(n, 1, rho_mid, a_m)
        record_stage(n, 2, rho_new, a_r)
        rho = rho_new
        record_node(n + 1, rho, a_r)
        if (n + 1) % check_every == 0:
            validate_density_matrix(rho, f"(t = {grid.nodes[n + 1]:.4g} ns)")
    validate_density_matrix(rho, "(final state)")
    return OracleResult(grid, p_f, p_free, alpha_out, pops, rho)


@dataclass
class ComparisonReport:
    """Cascade model vs exact oracle on identical parameters."""

    n_atoms: int
    beta: float
    area: float
    max_rel_p_f_dev: float
    eta_f_oracle: float
    eta_f_cascade: float
    eta_f_dev: float
    t_delay_oracle: float
    t_delay_cascade: float
    coherent_amp_rel_dev: float
    times: np.ndarray
    p_f_oracle: np.ndarray
    p_f_cascade: np.ndarray
    alpha_oracle: np.ndarray
    alpha_cascade: np.ndarray


def compare_to_cascade(
    n_atoms: int,
    beta: float,
    area: float,
    grid: StepGrid,
    params: Optional[PhysicalParams] = None,
    n_phi: int = 32,
) -> ComparisonReport:
    """Run oracle and cascade model side by side (ideal preparation)."""
    params = params or PhysicalParams(n_atoms=n_atoms)
    gen = build_generator(n_atoms, beta, params)
    oracle = evolve(gen, product_state(n_atoms, area), grid)
    cascade = propagate_ensemble(
        params, np.full(n_atoms, beta), Preparation.ideal(area), grid, n_phi
    )

    pf_o, pf_c = oracle.p_f, cascade.p_f
    scale = max(pf_o.max(), 1e-300)
    max_rel = float(np.abs(pf_o - pf_c).max() / scale)

    def eta(stages, e_st):
        return float(
            (grid.integrate_decay(stages) + stages[-1, 2] / params.gamma) / e_st
        )

    e_st = n_atoms * ideal_state(area).p_e
    eta_o = eta(oracle.p_f_stages, e_st)
    eta_c = eta(cascade.p_f_stages, e_st)
    _, td_o = peak_and_delay(pf_o, grid)
    _, td_c = peak_and_delay(pf_c, grid)

    a_o = oracle.alpha_out
    a_c = cascade.alpha_out
    amp_scale = np.abs(a_o).max()
    if amp_scale > 0.0:
        mask = np.abs(a_o) > 0.1 * amp_scale
        amp_dev = float(np.abs(a_o[mask] - a_c[mask]).max() / amp_scale)
    else:
        amp_dev = float(np.abs(a_c).max())
    return ComparisonReport(
        n_atoms=n_atoms,
        beta=float(beta),
        area=float(area),
        max_rel_p_f_dev=max_rel,
        eta_f_oracle=eta_o,
        eta_f_cascade=eta_c,
        eta_f_dev=abs(eta_o - eta_c),
        t_delay_oracle=td_o,
        t_delay_cascade=td_c,
        coherent_amp_rel_dev=amp_dev,
        times=grid.nodes,
        p_f_oracle=pf_o,
        p_f_cascade=pf_c,
        alpha_oracle=a_o,
        alpha_cascade=a_c,
    )
