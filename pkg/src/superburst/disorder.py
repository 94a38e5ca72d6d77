"""Coupling-strength disorder: truncated-Gaussian sampling and averaging.

Thermal motion makes each atom's guided-mode coupling fluctuate between
experimental runs but not during one collective decay, so beta is drawn
once per atom per realization from a Gaussian truncated to (0, 1) and
held fixed along the trajectory. Realizations use per-index substreams
derived from (seed, realization), so realization r never depends on
whether r-1 was computed, and chunks of realizations can run on worker
threads without changing any bit of the result.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cascade import (
    DEFAULT_N_PHI,
    EnsembleResult,
    MixedFieldTrace,
    Preparation,
    propagate_ensemble,
)
from .errors import ConfigError
from .grid import StepGrid
from .observables import forward_fraction, peak_and_delay
from .params import PhysicalParams

_MIN_ACCEPTANCE = 1e-6


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian in beta truncated to the physical interval (0, 1)."""

    mean: float
    std: float

    lower = 0.0
    upper = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.mean < 1.0:
            raise ConfigError(f"mean coupling must lie in (0, 1), got {self.mean}")
        if self.std < 0.0:
            raise ConfigError(f"coupling std must be >= 0, got {self.std}")

    def acceptance(self) -> float:
        """Probability that an untruncated draw lands inside (0, 1)."""
        if self.std == 0.0:
            return 1.0
        a = (self.lower - self.mean) / self.std
        b = (self.upper - self.mean) / self.std
        return 0.5 * (math.erf(b / math.sqrt(2)) - math.erf(a / math.sqrt(2)))


@dataclass(frozen=True)
class DisorderPlan:
    dist: TruncatedGaussian
    n_realizations: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_realizations < 1:
            raise ConfigError("need at least one realization")


def sample_betas(dist: TruncatedGaussian, n_atoms: int, seed) -> np.ndarray:
    """Draw per-atom couplings by rejection against the open interval (0, 1).

    seed may be an int or a sequence (root_seed, realization_index);
    identical seeds give identical draws.
    """
    if n_atoms < 1:
        raise ConfigError("n_atoms must be >= 1")
    if dist.std == 0.0:
        return np.full(n_atoms, dist.mean)
    if dist.acceptance() < _MIN_ACCEPTANCE:
        raise ConfigError(
            "truncated-Gaussian acceptance below 1e-6; parameters are pathological"
        )
    rng = np.random.default_rng(seed)
    out = np.empty(n_atoms)
    filled = 0
    while filled < n_atoms:
        draws = rng.normal(dist.mean, dist.std, size=n_atoms - filled)
        good = draws[(draws > dist.lower) & (draws < dist.upper)]
        out[filled : filled + good.size] = good
        filled += good.size
    return out


@dataclass
class NScanPoint:
    """Disorder-averaged result for one prefix length of the cascade."""

    n_atoms: int
    p_f_mean_stages: np.ndarray
    alpha_mean_stages: np.ndarray
    p_f_std: np.ndarray
    e_st_mean: float
    p_max_r: np.ndarray
    t_delay_r: np.ndarray
    eta_f_r: np.ndarray


@dataclass
class DisorderAverage:
    """Mean ensemble result over realizations plus spread diagnostics.

    result holds the realization means of every linear quantity, with
    the output field re-encoded so that its coherent amplitude is the
    disorder-and-phase mean and its incoherent flux absorbs the rest of
    the mean total power. p_f_std is the pointwise standard deviation
    over realizations; *_r arrays hold per-realization scalars.
    """

    result: EnsembleResult
    n_realizations: int
    p_f_std: np.ndarray
    e_st_std: float
    p_max_r: np.ndarray
    t_delay_r: np.ndarray
    eta_f_r: Optional[np.ndarray]
    n_scan: Optional[dict[int, NScanPoint]] = None


def _mean_field(grid: StepGrid, alpha_stages, total_stages) -> MixedFieldTrace:
    f = total_stages - np.abs(alpha_stages) ** 2
    return MixedFieldTrace(grid, alpha_stages, np.clip(f, 0.0, None))


def _per_realization_metrics(grid, pf_stages, e_st, gamma, want_eta):
    n_r = pf_stages.shape[0]
    p_max = np.empty(n_r)
    t_delay = np.empty(n_r)
    for r in range(n_r):
        p_max[r], t_delay[r] = peak_and_delay(grid.node_values(pf_stages[r]), grid)
    eta = None
    if want_eta:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eta = forward_fraction(pf_stages, grid, e_st, gamma)
    return p_max, t_delay, eta


def average_realizations(
    params: PhysicalParams,
    plan: DisorderPlan,
    prep: Preparation,
    grid: StepGrid,
    n_phi: int = DEFAULT_N_PHI,
    threads: int = 1,
    snapshot_after: Optional[Sequence[int]] = None,
    compute_eta: bool = True,
) -> DisorderAverage:
    """Run the cascade once per realization and average the traces.

    Fresh couplings are drawn for every realization from substream
    (plan.seed, r). Realizations are split into chunks executed on up
    to `threads` workers; each realization's trace is computed
    independently and the reduction happens once over the assembled
    per-realization arrays, so the output is identical for any thread
    count.
    """
    n_r = plan.n_realizations
    n_atoms = params.n_atoms
    m = grid.n_steps
    want = sorted(set(snapshot_after)) if snapshot_after else []

    pf = np.empty((n_r, m, 3))
    alpha = np.empty((n_r, m, 3), dtype=np.complex128)
    free = np.empty((n_r, m, 3))
    inp = np.empty((n_r, m, 3))
    sum_pe = np.empty((n_r, m + 1))
    sum_dpe = np.empty((n_r, m + 1))
    e_st = np.empty(n_r)
    snap_pf = {k: np.empty((n_r, m, 3)) for k in want}
    snap_alpha = {k: np.empty((n_r, m, 3), dtype=np.complex128) for k in want}
    snap_est = {k: np.empty(n_r) for k in want}

    def run_chunk(indices):
        betas = np.stack(
            [sample_betas(plan.dist, n_atoms, (plan.seed, r)) for r in indices]
        )
        out = propagate_ensemble(
            params, betas, prep, grid, n_phi,
            keep_per_atom=False,
            snapshot_after=want or None,
        )
        res, snaps = out if want else (out, {})
        sl = np.asarray(indices)
        pf[sl] = res.p_f_stages
        alpha[sl] = res.field_out.alpha_c_stages
        free[sl] = res.free_power_stages
        inp[sl] = res.input_power_stages
        sum_pe[sl] = res.sum_pe_nodes
        sum_dpe[sl] = res.sum_dpe_dt_nodes
        e_st[sl] = res.stored_energy
        for k, snap in snaps.items():
            snap_pf[k][sl] = snap.field.total_stages
            snap_alpha[k][sl] = snap.field.alpha_c_stages
            snap_est[k][sl] = snap.stored_energy

    threads = max(1, int(threads))
    chunks = [c for c in np.array_split(np.arange(n_r), min(threads, n_r)) if c.size]
    if len(chunks) == 1:
        run_chunk(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(run_chunk, chunks))

    mean_result = EnsembleResult(
        grid=grid,
        field_out=_mean_field(grid, alpha.mean(axis=0), pf.mean(axis=0)),
        input_power_stages=inp.mean(axis=0),
        free_power_stages=free.mean(axis=0),
        sum_pe_nodes=sum_pe.mean(axis=0),
        sum_dpe_dt_nodes=sum_dpe.mean(axis=0),
        stored_energy=e_st.mean(axis=0),
        betas=np.full(n_atoms, plan.dist.mean),
    )
    ddof = 1 if n_r > 1 else 0
    p_max_r, t_delay_r, eta_r = _per_realization_metrics(
        grid, pf, e_st, params.gamma, compute_eta
    )
    n_scan = None
    if want:
        n_scan = {}
        for k in want:
            pm, td, et = _per_realization_metrics(
                grid, snap_pf[k], snap_est[k], params.gamma, compute_eta
            )
            n_scan[k] = NScanPoint(
                n_atoms=k,
                p_f_mean_stages=snap_pf[k].mean(axis=0),
                alpha_mean_stages=snap_alpha[k].mean(axis=0),
                p_f_std=grid.node_values(snap_pf[k]).std(axis=0, ddof=ddof),
                e_st_mean=float(snap_est[k].mean()),
                p_max_r=pm,
                t_delay_r=td,
                eta_f_r=et,
            )
    return DisorderAverage(
        result=mean_result,
        n_realizations=n_r,
        p_f_std=grid.node_values(pf).std(axis=0, ddof=ddof),
        e_st_std=float(e_st.std(ddof=ddof)),
        p_max_r=p_max_r,
        t_delay_r=t_delay_r,
        eta_f_r=eta_r,
        n_scan=n_scan,
    )
