"""Figures of merit extracted from power traces and field statistics.

Peak power and burst delay, forward-emitted energy fraction, power-law
exponents and the threshold atom number, plus the laser-fluorescence
cross correlation and its averaged amplitude.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .grid import StepGrid

TAIL_FRACTION_WARN = 1e-3


@dataclass(frozen=True)
class BurstMetrics:
    """Peak power (photons/ns), its delay after pulse-off (ns), and the
    forward-emitted fraction of the stored energy."""

    p_max: float
    t_delay: float
    eta_f: Optional[float] = None


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    exponent_err: float
    n_lo: float
    n_hi: float
    n_points: int


@dataclass(frozen=True)
class ThresholdFit:
    """Two-segment continuous power law fitted in log-log space."""

    n_threshold: float
    exponent_below: float
    exponent_above: float
    degenerate: bool
    sse: float


@dataclass(frozen=True)
class CosineFit:
    amplitude: float
    stderr: float


def peak_and_delay(trace: np.ndarray, grid: StepGrid) -> Tuple[float, float]:
    """Maximum of P_f over t >= 0 and the time it occurs.

    trace is a node series over the full grid; ties resolve to the
    earliest time, so a monotone decay reports t_delay = 0.
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.ndim != 1 or trace.shape[-1] != grid.n_nodes:
        raise ConfigError("trace must be a node series matching the grid")
    post = trace[grid.i_zero :]
    if post.size == 0:
        raise ConfigError("trace has no samples at t >= 0")
    idx = int(np.argmax(post))
    return float(post[idx]), float(grid.times_decay[idx])


def forward_fraction(
    trace_stages: np.ndarray, grid: StepGrid, e_stored, gamma: float
):
    """Fraction of the stored energy emitted into the forward mode.

    eta_f = [int_0^t_end P_f dt + P_f(t_end)/Gamma] / E_st; the second
    term corrects for the truncated exponential tail. Warns when the
    trace has not decayed to below 1e-3 of its peak by t_end.
    """
    e_stored = np.asarray(e_stored, dtype=np.float64)
    if np.any(e_stored <= 0.0):
        raise ConfigError("eta_f is undefined for zero stored energy")
    p_end = trace_stages[..., -1, 2]
    p_max = trace_stages[..., grid.i_zero :, :].max(axis=(-1, -2))
    if np.any(p_end > TAIL_FRACTION_WARN * np.maximum(p_max, 1e-300)):
        warnings.warn(
            "P_f(t_end) exceeds 1e-3 of the peak; the tail correction "
            "assumes single-atom exponential decay from t_end on",
            stacklevel=2,
        )
    eta = (grid.integrate_decay(trace_stages) + p_end / gamma) / e_stored
    return eta if eta.ndim else float(eta)


def _loglog_design(n, y, n_range):
    n = np.asarray(n, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if n_range is not None:
        lo, hi = n_range
        keep = (n >= lo) & (n <= hi)
        n, y = n[keep], y[keep]
    if np.any(n <= 0.0) or np.any(y <= 0.0):
        raise ConfigError("power-law fits need positive N and positive values")
    return np.log(n), np.log(y)


def fit_power_law(n, y, n_range=None) -> PowerLawFit:
    """Least-squares line in log-log space; the exponent is the slope.

    The exponent error comes from the residual covariance, so an exact
    power law reports zero uncertainty.
    """
    x, z = _loglog_design(n, y, n_range)
    if x.size < 3:
        raise ConfigError("power-law fit needs at least 3 points")
    design = np.column_stack([x, np.ones_like(x)])
    coef, _, _, _ = np.linalg.lstsq(design, z, rcond=None)
    resid = z - design @ coef
    dof = x.size - 2
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return PowerLawFit(
        exponent=float(coef[0]),
        exponent_err=float(np.sqrt(max(cov[0, 0], 0.0))),
        n_lo=float(np.exp(x.min())),
        n_hi=float(np.exp(x.max())),
        n_points=int(x.size),
    )


def detect_threshold(n, y) -> ThresholdFit:
    """Knee of a two-segment continuous power law.

    Fits y = a + s1*min(x-b, 0) + s2*max(x-b, 0) in log-log coordinates
    for candidate breakpoints b (the interior data abscissas and the
    midpoints between neighbours), keeping the candidate with the least
    total squared residual. Each segment must keep at least 3 points.
    A fit whose best breakpoint sits at the candidate boundary, or whose
    two slopes coincide, is flagged degenerate.
    """
    x, z = _loglog_design(n, y, None)
    order = np.argsort(x)
    x, z = x[order], z[order]
    if x.size < 6:
        raise ConfigError("threshold detection needs at least 6 points")
    mids = 0.5 * (x[:-1] + x[1:])
    candidates = np.unique(np.concatenate([x, mids]))
    candidates = [
        b for b in candidates
        if (x <= b).sum() >= 3 and (x > b).sum() >= 3
    ]
    if not candidates:
        raise ConfigError("not enough points on each side of any breakpoint")

    best = None
    for i, b in enumerate(candidates):
        design = np.column_stack(
            [np.ones_like(x), np.minimum(x - b, 0.0), np.maximum(x - b, 0.0)]
        )
        coef, _, _, _ = np.linalg.lstsq(design, z, rcond=None)
        resid = z - design @ coef
        sse = float(resid @ resid)
        if best is None or sse < best[0]:
            best = (sse, i, b, coef)
    sse, i_best, b_best, coef = best
    slopes_equal = abs(coef[1] - coef[2]) <= 1e-8 * max(1.0, abs(coef[1]))
    degenerate = slopes_equal or i_best in (0, len(candidates) - 1)
    return ThresholdFit(
        n_threshold=float(np.exp(b_best)),
        exponent_below=float(coef[1]),
        exponent_above=float(coef[2]),
        degenerate=bool(degenerate),
        sse=sse,
    )


def cross_correlation(
    alpha: np.ndarray, power: np.ndarray, grid: StepGrid, t_ref: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized correlation X(tau) between the field at t_ref and t_ref+tau.

    alpha is the mean coherent amplitude and power the total flux of the
    detected mode on the grid nodes; t_ref must lie in the pulse window
    (t_ref <= 0) where the transmitted laser dominates. Returned taus
    cover t_ref + tau >= 0; the cos(Omega_LO tau) modulation of the
    measured quantity is applied separately (see heterodyne.forward_g2).
    """
    if t_ref > 0.0 or t_ref < grid.nodes[0]:
        raise ConfigError("t_ref must lie in the pulse window [t_start, 0]")
    i_ref = grid.index_of(t_ref)
    p_ref = float(power[i_ref])
    if p_ref <= 0.0:
        raise ConfigError("zero power at the reference time")
    a_ref = complex(alpha[i_ref])
    sl = slice(grid.i_zero, None)
    tau = grid.nodes[sl] - grid.nodes[i_ref]
    denom = np.sqrt(p_ref * power[sl])
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.real(np.conj(a_ref) * alpha[sl]) / denom
    x = np.where(denom > 0.0, x, 0.0)
    return tau, np.clip(x, -1.0, 1.0)


def fit_cosine_amplitude(tau, series, omega_lo: float) -> CosineFit:
    """Least-squares amplitude of cos(omega_lo * tau) in a series.

    |amplitude| estimates the tau-averaged magnitude of X. The series
    should span at least two oscillation periods; shorter than one
    period is rejected.
    """
    tau = np.asarray(tau, dtype=np.float64)
    series = np.asarray(series, dtype=np.float64)
    period = 2.0 * np.pi / omega_lo
    span = tau.max() - tau.min()
    if span < period:
        raise ConfigError("series shorter than one oscillation period")
    if span < 2.0 * period:
        warnings.warn("series spans fewer than two oscillation periods", stacklevel=2)
    c = np.cos(omega_lo * tau)
    norm = float(c @ c)
    amp = float(series @ c) / norm
    resid = series - amp * c
    sigma2 = float(resid @ resid) / max(len(tau) - 1, 1)
    return CosineFit(amplitude=amp, stderr=float(np.sqrt(sigma2 / norm)))
