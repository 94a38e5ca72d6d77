"""Compiled inner loop for the phase-mixture Bloch solve.

Same mathematics as bloch.integrate_bloch, specialized to the cascade's
(realization, phase) batch layout and compiled with numba. Every
(realization, phase) element evolves independently with scalar
arithmetic and the phase average is a fixed-order sum, so results do
not depend on how realizations are chunked across worker threads.
fastmath stays off: IEEE semantics are part of the determinism
contract. Falls back to the pure-numpy integrator when numba is
unavailable (set SUPERBURST_BACKEND=numpy to force the fallback).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    if os.environ.get("SUPERBURST_BACKEND", "").lower() == "numpy":
        return "numpy"
    return "numba" if HAVE_NUMBA else "numpy"


@njit(cache=True, nogil=True)
def _cascade_step_loop(
    h, ac, sf, phases, beta, gamma, s0, pe0,
    out_alpha, out_total, pe_st, s_nodes, pe_nodes, dpe_nodes,
):  # pragma: no cover - exercised via wrapper
    n_r, n_steps, _ = ac.shape
    n_p = phases.shape[0]
    inv_p = 1.0 / n_p
    vmax = 0.0
    for r in range(n_r):
        rb = np.sqrt(beta[r] * gamma)
        bg = beta[r] * gamma
        hg = 0.5 * gamma
        sbuf = s0[r].copy()
        pbuf = pe0[r].copy()
        ssum = 0.0 + 0.0j
        psum = 0.0
        for j in range(n_p):
            ssum += sbuf[j]
            psum += pbuf[j]
        s_nodes[r, 0] = ssum * inv_p
        pe_nodes[r, 0] = psum * inv_p
        last_frp = 0.0
        for n in range(n_steps):
            hn = h[n]
            ac0, ac1, ac2 = ac[r, n, 0], ac[r, n, 1], ac[r, n, 2]
            sf0, sf1, sf2 = sf[r, n, 0], sf[r, n, 1], sf[r, n, 2]
            acc_s = 0.0 + 0.0j
            acc_p = 0.0
            aout0 = 0.0 + 0.0j
            aout1 = 0.0 + 0.0j
            aout2 = 0.0 + 0.0j
            tot0 = tot1 = tot2 = 0.0
            pe0_a = pe1_a = pe2_a = 0.0
            dpe_a = 0.0
            frp_a = 0.0
            for j in range(n_p):
                ph = phases[j]
                a_l = ac0 + ph * sf0
                a_m = ac1 + ph * sf1
                a_r = ac2 + ph * sf2
                s = sbuf[j]
                pe = pbuf[j]

                im_l = a_l.real * s.imag - a_l.imag * s.real
                k1s = -hg * s - 1j * (rb * (1.0 - 2.0 * pe)) * a_l
                k1p = -gamma * pe - 2.0 * rb * im_l

                s2 = s + 0.5 * hn * k1s
                p2 = pe + 0.5 * hn * k1p
                im = a_m.real * s2.imag - a_m.imag * s2.real
                k2s = -hg * s2 - 1j * (rb * (1.0 - 2.0 * p2)) * a_m
                k2p = -gamma * p2 - 2.0 * rb * im

                s3 = s + 0.5 * hn * k2s
                p3 = pe + 0.5 * hn * k2p
                im = a_m.real * s3.imag - a_m.imag * s3.real
                k3s = -hg * s3 - 1j * (rb * (1.0 - 2.0 * p3)) * a_m
                k3p = -gamma * p3 - 2.0 * rb * im

                s4 = s + hn * k3s
                p4 = pe + hn * k3p
                im = a_r.real * s4.imag - a_r.imag * s4.real
                k4s = -hg * s4 - 1j * (rb * (1.0 - 2.0 * p4)) * a_r
                k4p = -gamma * p4 - 2.0 * rb * im

                sn = s + (hn / 6.0) * (k1s + 2.0 * (k2s + k3s) + k4s)
                pn = pe + (hn / 6.0) * (k1p + 2.0 * (k2p + k3p) + k4p)

                im_r = a_r.real * sn.imag - a_r.imag * sn.real
                frs = -hg * sn - 1j * (rb * (1.0 - 2.0 * pn)) * a_r
                frp = -gamma * pn - 2.0 * rb * im_r

                s_mid = 0.5 * (s + sn) + 0.125 * hn * (k1s - frs)
                p_mid = 0.5 * (pe + pn) + 0.125 * hn * (k1p - frp)
                im_m = a_m.real * s_mid.imag - a_m.imag * s_mid.real

                aout0 += a_l - 1j * rb * s
                tot0 += (a_l.real * a_l.real + a_l.imag * a_l.imag
                         + 2.0 * rb * im_l + bg * pe)
                pe0_a += pe
                aout1 += a_m - 1j * rb * s_mid
                tot1 += (a_m.real * a_m.real + a_m.imag * a_m.imag
                         + 2.0 * rb * im_m + bg * p_mid)
                pe1_a += p_mid
                aout2 += a_r - 1j * rb * sn
                tot2 += (a_r.real * a_r.real + a_r.imag * a_r.imag
                         + 2.0 * rb * im_r + bg * pn)
                pe2_a += pn
                dpe_a += k1p
                frp_a += frp

                sbuf[j] = sn
                pbuf[j] = pn
                acc_s += sn
                acc_p += pn
                v = (sn.real * sn.real + sn.imag * sn.imag) - pn * (1.0 - pn)
                if v > vmax:
                    vmax = v

            out_alpha[r, n, 0] = aout0 * inv_p
            out_alpha[r, n, 1] = aout1 * inv_p
            out_alpha[r, n, 2] = aout2 * inv_p
            out_total[r, n, 0] = tot0 * inv_p
            out_total[r, n, 1] = tot1 * inv_p
            out_total[r, n, 2] = tot2 * inv_p
            pe_st[r, n, 0] = pe0_a * inv_p
            pe_st[r, n, 1] = pe1_a * inv_p
            pe_st[r, n, 2] = pe2_a * inv_p
            dpe_nodes[r, n] = dpe_a * inv_p
            s_nodes[r, n + 1] = acc_s * inv_p
            pe_nodes[r, n + 1] = acc_p * inv_p
            last_frp = frp_a * inv_p
        dpe_nodes[r, n_steps] = last_frp
    return vmax


def run_cascade_kernel(grid, alpha_c_stages, sqrt_f_stages, phases, beta, gamma, s0, pe0):
    """Invoke the compiled loop on flattened (R, P) batches.

    alpha_c_stages/sqrt_f_stages: (R, n_steps, 3); beta: (R,);
    s0, pe0: (R, P). Returns the same tuple of arrays as the numpy
    integrator plus the maximum Bloch-ball violation.
    """
    n_r, n_steps, _ = alpha_c_stages.shape
    out_alpha = np.empty((n_r, n_steps, 3), dtype=np.complex128)
    out_total = np.empty((n_r, n_steps, 3))
    pe_st = np.empty((n_r, n_steps, 3))
    s_nodes = np.empty((n_r, n_steps + 1), dtype=np.complex128)
    pe_nodes = np.empty((n_r, n_steps + 1))
    dpe_nodes = np.empty((n_r, n_steps + 1))
    vmax = _cascade_step_loop(
        np.ascontiguousarray(grid.h),
        np.ascontiguousarray(alpha_c_stages),
        np.ascontiguousarray(sqrt_f_stages),
        np.ascontiguousarray(phases),
        np.ascontiguousarray(beta),
        gamma,
        np.ascontiguousarray(s0),
        np.ascontiguousarray(pe0),
        out_alpha, out_total, pe_st, s_nodes, pe_nodes, dpe_nodes,
    )
    return vmax, s_nodes, pe_nodes, pe_st, dpe_nodes, out_alpha, out_total
