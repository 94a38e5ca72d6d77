"""Command-line interface: simulation runs, scans, fitting, validation.

Subcommands: simulate, scan-n, scan-area, fit-disorder, oracle-compare,
heterodyne. Common flags: --config FILE, --seed U64, --out DIR,
--threads N (or the SUPERBURST_THREADS environment variable),
--overwrite. Numeric output uses 9 significant digits so repeated runs
diff byte-identically; exit codes: 0 ok, 2 config error, 3 numerical
failure, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cascade import Preparation
from .config import RunConfig, parse_config, write_config_json
from .disorder import DisorderPlan, TruncatedGaussian, average_realizations
from .errors import ConfigError, ConvergenceError, NumericalError, SuperburstError
from .fitting import FitProblem, FitSimConfig, TargetTrace, fit_disorder_params
from .grid import StepGrid, TimeGrid
from .heterodyne import forward_g2, monte_carlo_clicks
from .observables import (
    cross_correlation,
    detect_threshold,
    fit_cosine_amplitude,
    fit_power_law,
    forward_fraction,
    peak_and_delay,
)
from .oracle import compare_to_cascade
from .params import IDEAL_INSTANT, PhysicalParams, PulseSpec

THREADS_ENV = "SUPERBURST_THREADS"


def _fmt(x) -> str:
    """Decimal with 9 significant digits; stable across runs."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    n = len(columns[0])
    for c in columns:
        if len(c) != n:
            raise ValueError("csv columns must share a length")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(c[i]) for c in columns) + "\n")


def write_json(path: Path, payload: dict) -> None:
    def clean(v):
        if isinstance(v, (np.floating, float)):
            f = float(v)
            return f if math.isnan(f) else float(_fmt(f))
        if isinstance(v, (np.integer, int)):
            return int(v)
        if isinstance(v, dict):
            return {k: clean(u) for k, u in v.items()}
        if isinstance(v, (list, tuple, np.ndarray)):
            return [clean(u) for u in v]
        return v

    with open(path, "w", newline="\n") as fh:
        json.dump(clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out_dir(out: Optional[str], overwrite: bool) -> Path:
    if not out:
        raise ConfigError("no output directory: pass --out or set [output] directory")
    path = Path(out)
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise ConfigError(
            f"output directory {path} is not empty; pass --overwrite to reuse it"
        )
    path.mkdir(parents=True, exist_ok=True)
    return path


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        plan = dataclasses.replace(cfg.plan, seed=args.seed)
        cfg = dataclasses.replace(cfg, plan=plan)
        cfg.raw["disorder"]["seed"] = args.seed
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    if args.overwrite:
        cfg = dataclasses.replace(cfg, overwrite=True)
    return cfg


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"bad {THREADS_ENV} value: {env!r}") from exc
    return 1


def _trace_columns(grid: StepGrid, avg) -> tuple[Sequence[str], list[np.ndarray]]:
    res = avg.result
    n = grid.n_nodes
    header = ("t_ns", "p_f_mean", "p_f_std", "p_free_mean", "stored_energy")
    cols = [
        grid.nodes,
        res.p_f,
        avg.p_f_std,
        res.free_power,
        np.full(n, float(res.stored_energy)),
    ]
    return header, cols


def _mean_trace_metrics(avg, grid: StepGrid, gamma: float, want_eta: bool):
    res = avg.result
    p_max, t_delay = peak_and_delay(res.p_f, grid)
    eta = None
    if want_eta:
        eta = float(
            forward_fraction(res.p_f_stages, grid, res.stored_energy, gamma)
        )
    return p_max, t_delay, eta


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    out = _prepare_out_dir(cfg.out_dir, cfg.overwrite)
    threads = _threads(args)
    avg = average_realizations(
        cfg.params, cfg.plan, cfg.prep, cfg.grid.build(), cfg.n_phi, threads=threads
    )
    grid = avg.result.grid
    p_max, t_delay, eta = _mean_trace_metrics(avg, grid, cfg.params.gamma, True)
    write_csv(out / "trace.csv", *_trace_columns(grid, avg))
    write_json(
        out / "summary.json",
        {"p_max": p_max, "t_delay_ns": t_delay, "eta_f": eta},
    )
    write_config_json(cfg, out / "config_used.json")
    return 0


def cmd_scan_n(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    out = _prepare_out_dir(cfg.out_dir, cfg.overwrite)
    threads = _threads(args)
    n_list = sorted({int(n) for n in args.n_list.split(",") if n.strip()})
    if not n_list:
        raise ConfigError("empty --n-list")
    params = dataclasses.replace(cfg.params, n_atoms=max(n_list))
    avg = average_realizations(
        params, cfg.plan, cfg.prep, cfg.grid.build(), cfg.n_phi,
        threads=threads, snapshot_after=n_list,
    )
    grid = avg.result.grid
    gamma = cfg.params.gamma

    p_maxes, delays, etas, e_sts = [], [], [], []
    for n in n_list:
        point = avg.n_scan[n]
        trace = grid.node_values(point.p_f_mean_stages)
        p_max, t_delay = peak_and_delay(trace, grid)
        eta = float(
            forward_fraction(point.p_f_mean_stages, grid, point.e_st_mean, gamma)
        )
        p_maxes.append(p_max)
        delays.append(t_delay)
        etas.append(eta)
        e_sts.append(point.e_st_mean)
        write_csv(
            out / f"trace_N{n}.csv",
            ("t_ns", "p_f_mean", "p_f_std", "stored_energy"),
            [grid.nodes, trace, point.p_f_std, np.full(grid.n_nodes, point.e_st_mean)],
        )
    write_csv(
        out / "scan_n.csv",
        ("n_atoms", "p_max", "t_delay_ns", "eta_f", "stored_energy"),
        [np.array(n_list), np.array(p_maxes), np.array(delays),
         np.array(etas), np.array(e_sts)],
    )

    summary: dict = {}
    if len(n_list) >= 6:
        thr = detect_threshold(n_list, p_maxes)
        below = fit_power_law(n_list, p_maxes, (0, thr.n_threshold))
        above = fit_power_law(n_list, p_maxes, (thr.n_threshold, np.inf))
        summary.update(
            n_threshold=thr.n_threshold,
            exponent_below=below.exponent,
            exponent_above=above.exponent,
        )
    # the trace.csv/summary.json contract also applies to the scan itself,
    # reported for the largest ensemble
    write_csv(out / "trace.csv", *_trace_columns(grid, avg))
    p_max, t_delay, eta = _mean_trace_metrics(avg, grid, gamma, True)
    summary.update(p_max=p_max, t_delay_ns=t_delay, eta_f=eta)
    write_json(out / "summary.json", summary)
    write_config_json(cfg, out / "config_used.json")
    return 0


def _parse_areas(spec: str) -> np.ndarray:
    if ":" in spec:
        lo, hi, step = (float(x) for x in spec.split(":"))
        n = int(round((hi - lo) / step))
        areas = lo + step * np.arange(n + 1)
    else:
        areas = np.array([float(x) for x in spec.split(",") if x.strip()])
    if areas.size == 0 or np.any(areas < 0.0) or np.any(areas > 2.5):
        raise ConfigError("pulse areas must lie in [0, 2.5] pi")
    return areas


def cmd_scan_area(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    out = _prepare_out_dir(cfg.out_dir, cfg.overwrite)
    threads = _threads(args)
    areas_pi = _parse_areas(args.areas_pi)
    grid = cfg.grid.build()
    omega = cfg.heterodyne.omega_lo
    driven = cfg.prep.mode != IDEAL_INSTANT

    delays, p_maxes, amps = [], [], []
    norm_traces, xmod_cols = [], []
    rep_trace = None
    rep_area = None
    for a in areas_pi:
        if driven:
            prep = Preparation.driven(
                dataclasses.replace(cfg.prep.pulse, area=a * np.pi)
            )
        else:
            prep = Preparation.ideal(a * np.pi)
        avg = average_realizations(
            cfg.params, cfg.plan, prep, grid, cfg.n_phi,
            threads=threads, compute_eta=False,
        )
        res = avg.result
        p_max, t_delay = peak_and_delay(res.p_f, grid)
        p_maxes.append(p_max)
        delays.append(t_delay)
        norm_traces.append(
            res.p_f_decay / p_max if p_max > 0 else np.zeros_like(res.p_f_decay)
        )
        if driven and a > 0.0:
            tau, x = cross_correlation(res.alpha_out, res.p_f, grid, cfg.t_ref)
            xmod = x * np.cos(omega * tau)
            fit = fit_cosine_amplitude(tau, xmod, omega)
            amps.append(fit.amplitude)
            xmod_cols.append(xmod)
        else:
            amps.append(float("nan"))
            xmod_cols.append(np.full(grid.n_nodes - grid.i_zero, np.nan))
        if rep_area is None or abs(a - 1.0) < abs(rep_area - 1.0):
            rep_area = a
            rep_trace = (avg, p_max, t_delay)

    write_csv(
        out / "scan_area.csv",
        ("area_pi", "p_max", "t_delay_ns", "coherence_amplitude"),
        [areas_pi, np.array(p_maxes), np.array(delays), np.array(amps)],
    )
    t_dec = grid.times_decay
    write_csv(
        out / "traces_norm.csv",
        ["t_ns"] + [f"p_norm_A{a:.4g}" for a in areas_pi],
        [t_dec] + norm_traces,
    )
    if driven:
        tau = t_dec - cfg.t_ref
        write_csv(
            out / "xcorr.csv",
            ["tau_ns"] + [f"x_mod_A{a:.4g}" for a in areas_pi],
            [tau] + xmod_cols,
        )
    avg, p_max, t_delay = rep_trace
    write_csv(out / "trace.csv", *_trace_columns(grid, avg))
    i_rep = int(np.argmin(np.abs(areas_pi - rep_area)))
    write_json(
        out / "summary.json",
        {
            "p_max": p_max,
            "t_delay_ns": t_delay,
            "coherence_amplitude": amps[i_rep],
        },
    )
    write_config_json(cfg, out / "config_used.json")
    return 0


def _load_target(spec: str, cfg: RunConfig) -> TargetTrace:
    parts = spec.split(":")
    path = Path(parts[0])
    if not path.exists():
        raise ConfigError(f"target file not found: {path}")
    n_atoms = int(parts[1]) if len(parts) > 1 else cfg.params.n_atoms
    area_pi = float(parts[2]) if len(parts) > 2 else cfg.raw["pulse"]["area_pi"]
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or not {"t_ns", "p_f"} <= set(data.dtype.names):
        raise ConfigError(f"{path}: target CSV needs columns t_ns,p_f")
    if cfg.prep.mode == IDEAL_INSTANT:
        prep = Preparation.ideal(area_pi * np.pi)
    else:
        prep = Preparation.driven(
            dataclasses.replace(cfg.prep.pulse, area=area_pi * np.pi)
        )
    return TargetTrace(
        n_atoms=n_atoms,
        prep=prep,
        times=np.atleast_1d(data["t_ns"]),
        p_f=np.atleast_1d(data["p_f"]),
    )


def cmd_fit_disorder(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    out = _prepare_out_dir(cfg.out_dir, cfg.overwrite)
    threads = _threads(args)
    targets = [_load_target(spec, cfg) for spec in args.target]
    problem = FitProblem(targets=targets)
    sim = FitSimConfig(
        grid=cfg.grid.build(),
        gamma=cfg.params.gamma,
        n_realizations=cfg.plan.n_realizations,
        n_phi=cfg.n_phi,
        threads=threads,
    )
    result = fit_disorder_params(
        problem, sim, cfg.seed, max_evals=args.max_evals
    )
    report = {
        "beta_mean": result.beta_mean,
        "beta_std": result.beta_std,
        "objective": result.objective,
        "n_evaluations": result.n_evaluations,
        "converged": result.converged,
        "degenerate": result.degenerate,
        "history": [list(h) for h in result.history],
    }
    write_json(out / "fit_report.json", report)

    # best-fit simulation of the first target, for inspection
    plan = DisorderPlan(
        TruncatedGaussian(result.beta_mean, result.beta_std),
        cfg.plan.n_realizations,
        cfg.seed,
    )
    params = dataclasses.replace(
        cfg.params, beta_nominal=result.beta_mean, n_atoms=targets[0].n_atoms
    )
    avg = average_realizations(
        params, plan, targets[0].prep, sim.grid, cfg.n_phi, threads=threads
    )
    write_csv(out / "trace.csv", *_trace_columns(sim.grid, avg))
    p_max, t_delay, eta = _mean_trace_metrics(avg, sim.grid, cfg.params.gamma, True)
    write_json(
        out / "summary.json",
        {"p_max": p_max, "t_delay_ns": t_delay, "eta_f": eta},
    )
    write_config_json(cfg, out / "config_used.json")
    if not result.converged:
        raise ConvergenceError(
            f"fit did not converge within {args.max_evals} evaluations "
            f"(best objective {result.objective:.3e})"
        )
    return 0


def cmd_oracle_compare(args) -> int:
    if args.config:
        cfg = _apply_overrides(parse_config(args.config), args)
        out_dir = cfg.out_dir
        overwrite = cfg.overwrite
        gamma = cfg.params.gamma
    else:
        out_dir = args.out
        overwrite = args.overwrite
        gamma = PhysicalParams().gamma
    out = _prepare_out_dir(out_dir, overwrite)
    grid = TimeGrid(0.0, args.t_end, 0.02, args.dt).build()
    params = PhysicalParams(gamma=gamma, beta_nominal=args.beta, n_atoms=args.n_atoms)
    rep = compare_to_cascade(
        args.n_atoms, args.beta, args.area_pi * np.pi, grid,
        params=params, n_phi=args.n_phi,
    )
    write_csv(
        out / "oracle_compare.csv",
        (
            "t_ns", "p_f_oracle", "p_f_cascade",
            "alpha_re_oracle", "alpha_im_oracle",
            "alpha_re_cascade", "alpha_im_cascade",
        ),
        [
            rep.times, rep.p_f_oracle, rep.p_f_cascade,
            rep.alpha_oracle.real, rep.alpha_oracle.imag,
            rep.alpha_cascade.real, rep.alpha_cascade.imag,
        ],
    )
    write_json(
        out / "deviation_report.json",
        {
            "n_atoms": rep.n_atoms,
            "beta": rep.beta,
            "area_pi": rep.area / math.pi,
            "max_rel_p_f_dev": rep.max_rel_p_f_dev,
            "eta_f_oracle": rep.eta_f_oracle,
            "eta_f_cascade": rep.eta_f_cascade,
            "eta_f_dev": rep.eta_f_dev,
            "t_delay_oracle_ns": rep.t_delay_oracle,
            "t_delay_cascade_ns": rep.t_delay_cascade,
            "coherent_amp_rel_dev": rep.coherent_amp_rel_dev,
        },
    )
    return 0


def cmd_heterodyne(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    out = _prepare_out_dir(cfg.out_dir, cfg.overwrite)
    threads = _threads(args)
    if cfg.prep.mode == IDEAL_INSTANT:
        raise ConfigError(
            "heterodyne analysis needs the driven-pulse mode (the laser "
            "reference lives in the pulse window)"
        )
    grid = cfg.grid.build()
    avg = average_realizations(
        cfg.params, cfg.plan, cfg.prep, grid, cfg.n_phi, threads=threads
    )
    res = avg.result
    het = cfg.heterodyne
    tau, x = cross_correlation(res.alpha_out, res.p_f, grid, cfg.t_ref)
    xmod = x * np.cos(het.omega_lo * tau)
    fit = fit_cosine_amplitude(tau, xmod, het.omega_lo)

    # forward model of the detected g2 along the t = t_ref row
    i_ref = grid.index_of(cfg.t_ref)
    sl = slice(grid.i_zero, None)
    p_pair = np.array([res.p_f[i_ref], 0.0])
    g2_row = np.empty(tau.size)
    v_row = np.empty(tau.size)
    for j, idx in enumerate(range(grid.i_zero, grid.n_nodes)):
        p_pair[1] = res.p_f[idx]
        surf = forward_g2(
            np.array([0.0, tau[j]]), p_pair, np.array([[1.0, x[j]], [x[j], 1.0]]), het
        )
        g2_row[j] = surf.g2_d[0, 1]
        v_row[j] = surf.v_max[0, 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        extracted = np.where(v_row > 1e-3, (g2_row - 1.0) / v_row, np.nan)
    write_csv(
        out / "heterodyne.csv",
        ("tau_ns", "x_mod_model", "g2_d", "v_max", "g1_extracted"),
        [tau, xmod, g2_row, v_row, extracted],
    )

    if cfg.mc_repetitions > 1:
        est = monte_carlo_clicks(
            grid.times_decay,
            res.alpha_out[sl],
            het,
            n_reps=cfg.mc_repetitions,
            bin_width=cfg.mc_bin_width,
            seed=cfg.seed,
        )
        i0 = 0
        write_csv(
            out / "clicks_g2.csv",
            ("tau_ns", "g2_est", "g2_err"),
            [est.bin_centers - est.bin_centers[i0], est.g2_d[i0], est.g2_err[i0]],
        )

    write_csv(out / "trace.csv", *_trace_columns(grid, avg))
    p_max, t_delay, eta = _mean_trace_metrics(avg, grid, cfg.params.gamma, True)
    write_json(
        out / "summary.json",
        {
            "p_max": p_max,
            "t_delay_ns": t_delay,
            "eta_f": eta,
            "coherence_amplitude": fit.amplitude,
        },
    )
    write_config_json(cfg, out / "config_used.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="superburst",
        description="Superradiant burst dynamics of a waveguide-coupled ensemble",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="INI or JSON config")
        p.add_argument("--seed", type=int, default=None, help="override [disorder] seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
        p.add_argument("--overwrite", action="store_true",
                       help="allow writing into a non-empty directory")

    p = sub.add_parser("simulate", help="one disorder-averaged burst simulation")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("scan-n", help="burst metrics vs atom number")
    common(p)
    p.add_argument("--n-list", required=True, help="comma-separated atom numbers")
    p.set_defaults(fn=cmd_scan_n)

    p = sub.add_parser("scan-area", help="burst metrics vs pulse area")
    common(p)
    p.add_argument("--areas-pi", required=True,
                   help="areas in pi units: lo:hi:step or comma list")
    p.set_defaults(fn=cmd_scan_area)

    p = sub.add_parser("fit-disorder", help="fit (beta_mean, beta_std) to traces")
    common(p)
    p.add_argument("--target", action="append", required=True,
                   help="target CSV path[:n_atoms[:area_pi]]; repeatable")
    p.add_argument("--max-evals", type=int, default=400)
    p.set_defaults(fn=cmd_fit_disorder)

    p = sub.add_parser("oracle-compare", help="exact master equation vs cascade model")
    common(p, config_required=False)
    p.add_argument("--n-atoms", type=int, default=3)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--area-pi", type=float, default=0.5)
    p.add_argument("--t-end", type=float, default=150.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--n-phi", type=int, default=32)
    p.set_defaults(fn=cmd_oracle_compare)

    p = sub.add_parser("heterodyne", help="laser-fluorescence coherence analysis")
    common(p)
    p.set_defaults(fn=cmd_heterodyne)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 4
    except SuperburstError as exc:  # safety net
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
