"""Heterodyne detection: g2 of the beat signal and g1 extraction.

The signal is superposed with a strong local oscillator detuned by
Omega_LO whose phase drifts randomly between repetitions. Averaging
over that phase, the detected normalized second-order correlation is

    g2_D(t, tau) = 1 + V_max(t, tau) cos(Omega_LO tau) g1(t, tau)
    V_max(t, tau) = 2 P_LO sqrt(P(t) P(t+tau)) / (P_D(t) P_D(t+tau))

with P_D = P_LO + P; the signal's own g2 term is dropped, valid for
P_LO >> sqrt(P(t) P(t+tau)). Imperfect polarization overlap scales
V_max down. The Monte Carlo models repetitions classically: one LO
phase per repetition, ideal Poisson counters sampling the beat power at
the bin centers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError

OMEGA_LO_DEFAULT = 2.0 * np.pi * 0.230  # 1/ns, = 2 pi x 230 MHz
V_MAX_CUTOFF = 1e-3
LO_DOMINANCE_FACTOR = 100.0


@dataclass(frozen=True)
class HeterodyneConfig:
    p_lo: float
    omega_lo: float = OMEGA_LO_DEFAULT
    polarization_overlap: float = 1.0

    def __post_init__(self) -> None:
        if self.p_lo <= 0.0:
            raise ConfigError(f"local-oscillator flux must be > 0, got {self.p_lo}")
        if self.omega_lo <= 0.0:
            raise ConfigError(f"omega_lo must be > 0, got {self.omega_lo}")
        if not 0.0 < self.polarization_overlap <= 1.0:
            raise ConfigError("polarization_overlap must lie in (0, 1]")


@dataclass
class CorrelationSurface:
    """g2_D and V_max on the (t_i, t_j = t_i + tau) grid of `times`."""

    times: np.ndarray
    p_of_t: np.ndarray
    p_d_of_t: np.ndarray
    g2_d: np.ndarray
    v_max: np.ndarray


@dataclass
class ClickRecord:
    bin_edges: np.ndarray
    counts: np.ndarray  # (n_repetitions, n_bins)

    @property
    def n_repetitions(self) -> int:
        return self.counts.shape[0]


@dataclass
class ClickEstimate:
    record: ClickRecord
    bin_centers: np.ndarray
    g2_d: np.ndarray
    g2_err: np.ndarray


def forward_g2(
    times: np.ndarray,
    p_signal: np.ndarray,
    g1: np.ndarray,
    cfg: HeterodyneConfig,
) -> CorrelationSurface:
    """Predict the detected g2_D from signal power and model g1.

    g1 must be the real first-order coherence on the same time grid,
    shape (len(times), len(times)) with entry [i, j] = g1(t_i, t_j).
    """
    times = np.asarray(times, dtype=np.float64)
    p = np.asarray(p_signal, dtype=np.float64)
    g1 = np.asarray(g1, dtype=np.float64)
    if g1.shape != (p.size, p.size):
        raise ConfigError("g1 surface shape must match the signal power grid")
    if cfg.p_lo < LO_DOMINANCE_FACTOR * p.max(initial=0.0):
        warnings.warn(
            "P_LO is not >> signal power; the dropped signal-g2 term may matter",
            stacklevel=2,
        )
    p_d = cfg.p_lo + p
    v = (
        2.0 * cfg.p_lo * np.sqrt(np.outer(p, p)) / np.outer(p_d, p_d)
        * cfg.polarization_overlap
    )
    tau = times[None, :] - times[:, None]
    g2 = 1.0 + v * np.cos(cfg.omega_lo * tau) * g1
    return CorrelationSurface(times=times, p_of_t=p, p_d_of_t=p_d, g2_d=g2, v_max=v)


def extract_g1(surface: CorrelationSurface, cutoff: float = V_MAX_CUTOFF) -> np.ndarray:
    """Invert forward_g2: (g2_D - 1) / V_max = cos(Omega_LO tau) g1.

    Entries where V_max <= cutoff are NaN: with no fringe contrast the
    extraction is meaningless there.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (surface.g2_d - 1.0) / surface.v_max
    return np.where(surface.v_max > cutoff, out, np.nan)


def monte_carlo_clicks(
    times: np.ndarray,
    signal_alpha: np.ndarray,
    cfg: HeterodyneConfig,
    n_reps: int,
    bin_width: float,
    seed: int,
    random_phase_from: Optional[float] = None,
) -> ClickEstimate:
    """Simulate binned photon counting of the heterodyne beat.

    Per repetition one LO phase is drawn uniformly (the relative phase
    drifts on the repetition timescale); counts are Poisson with the
    classical beat power sampled at each bin center. When
    random_phase_from is given, the signal at times >= that value gets
    an extra independent random phase per repetition: emission with no
    fixed phase relation to the laser-locked early-time reference, whose
    cross fringes then wash out. Returns the counts plus the
    g2_D(t_i, t_j) estimate over repetitions with plug-in standard
    errors.
    """
    if n_reps < 2:
        raise ConfigError("need at least 2 repetitions")
    times = np.asarray(times, dtype=np.float64)
    dt = float(np.min(np.diff(times))) if times.size > 1 else bin_width
    if bin_width < dt - 1e-12:
        raise ConfigError("bin width must be at least the grid step")
    alpha = np.asarray(signal_alpha, dtype=np.complex128)

    t0, t1 = float(times[0]), float(times[-1])
    n_bins = max(int(np.floor((t1 - t0) / bin_width)), 1)
    edges = t0 + bin_width * np.arange(n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    a_c = np.interp(centers, times, alpha.real) + 1j * np.interp(
        centers, times, alpha.imag
    )
    p_c = np.abs(a_c) ** 2

    rng = np.random.default_rng(seed)
    overlap = np.sqrt(cfg.polarization_overlap)
    carrier = a_c * np.exp(-1j * cfg.omega_lo * centers)
    late = centers >= random_phase_from if random_phase_from is not None else None

    counts = np.empty((n_reps, n_bins), dtype=np.int32)
    sum_prod = np.zeros((n_bins, n_bins))
    sum_prod_sq = np.zeros((n_bins, n_bins))
    sum_sq_lin = np.zeros((n_bins, n_bins))  # E[n_i^2 n_j]
    sum_nn1 = np.zeros(n_bins)
    sum_nn1_sq = np.zeros(n_bins)
    sum_nn1_n = np.zeros(n_bins)
    chunk = 8192  # bounds the (reps, bins) temporaries
    for lo in range(0, n_reps, chunk):
        hi = min(lo + chunk, n_reps)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=hi - lo)
        amp = np.exp(-1j * theta)[:, None] * carrier[None, :]
        if late is not None:
            shift = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=hi - lo))
            amp[:, late] *= shift[:, None]
        beat = amp.real
        rates = cfg.p_lo + p_c[None, :] + 2.0 * np.sqrt(cfg.p_lo) * overlap * beat
        np.clip(rates, 0.0, None, out=rates)
        c = rng.poisson(rates * bin_width)
        counts[lo:hi] = c
        cf = c.astype(np.float64)
        sq = cf * cf
        sum_prod += cf.T @ cf
        sum_prod_sq += sq.T @ sq
        sum_sq_lin += sq.T @ cf
        nn1 = cf * (cf - 1.0)
        sum_nn1 += nn1.sum(axis=0)
        sum_nn1_sq += (nn1 * nn1).sum(axis=0)
        sum_nn1_n += (nn1 * cf).sum(axis=0)

    r = float(n_reps)
    mean_n = counts.mean(axis=0)
    prod_mean = sum_prod / r
    prod_sq = sum_prod_sq / r
    mean_sq = np.diag(prod_mean).copy()  # E[n^2] per bin
    # same-bin estimator uses the factorial moment n(n-1)
    np.fill_diagonal(prod_mean, sum_nn1 / r)
    np.fill_diagonal(prod_sq, sum_nn1_sq / r)

    denom = np.outer(mean_n, mean_n)
    with np.errstate(invalid="ignore", divide="ignore"):
        g2 = prod_mean / denom
        # delta-method (plug-in) variance of x/(u v) with x = n_i n_j,
        # keeping all sample covariances between numerator and means
        var_x = np.clip(prod_sq - prod_mean**2, 0.0, None)
        var_u = np.clip(mean_sq - mean_n**2, 0.0, None)
        cov_xu = sum_sq_lin / r - prod_mean * mean_n[:, None]
        cov_xv = cov_xu.T
        cov_uv = prod_mean - denom
        rel = (
            var_x / prod_mean**2
            + var_u[:, None] / mean_n[:, None] ** 2
            + var_u[None, :] / mean_n[None, :] ** 2
            - 2.0 * cov_xu / (prod_mean * mean_n[:, None])
            - 2.0 * cov_xv / (prod_mean * mean_n[None, :])
            + 2.0 * cov_uv / denom
        )
        # diagonal: x = n(n-1), g = x/u^2
        d_var_x = np.diag(var_x)
        d_cov_xu = sum_nn1_n / r - np.diag(prod_mean) * mean_n
        d_rel = (
            d_var_x / np.diag(prod_mean) ** 2
            + 4.0 * var_u / mean_n**2
            - 4.0 * d_cov_xu / (np.diag(prod_mean) * mean_n)
        )
        np.fill_diagonal(rel, d_rel)
        g2_err = np.abs(g2) * np.sqrt(np.clip(rel, 0.0, None) / r)
    record = ClickRecord(bin_edges=edges, counts=counts)
    return ClickEstimate(record=record, bin_centers=centers, g2_d=g2, g2_err=g2_err)
