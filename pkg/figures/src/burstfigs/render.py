"""Render paper-style figure panels from simulation output directories.

Recipes consume only the documented CSV/JSON files written by the
superburst CLI (trace.csv, trace_N*.csv, scan_n.csv, scan_area.csv,
traces_norm.csv, xcorr.csv, summary.json); they never touch simulator
internals. Inputs are opened read-only and rendering is deterministic,
so re-running a recipe on unchanged inputs reproduces the image byte
for byte.

Usage: superburst-figs --recipe fig1b --in RUN_DIR --out fig.png
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class SchemaError(Exception):
    """An input file is missing or lacks a required column."""


_RC = {
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "burstfigs",
}


def read_table(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Load a CSV as {column name: array}, validating required columns."""
    if not path.exists():
        raise SchemaError(f"missing input file: {path}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged table")
    table = {name: data[:, i] for i, name in enumerate(header)}
    missing = [c for c in required if c not in table]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    return table


def area_columns(table: dict[str, np.ndarray], prefix: str):
    """Columns named '<prefix><area>' sorted by their pulse area."""
    pairs = []
    for name in table:
        m = re.fullmatch(re.escape(prefix) + r"([0-9.eE+-]+)", name)
        if m:
            pairs.append((float(m.group(1)), table[name]))
    if not pairs:
        raise SchemaError(f"no '{prefix}*' columns found")
    pairs.sort(key=lambda p: p[0])
    areas = np.array([p[0] for p in pairs])
    return areas, np.column_stack([p[1] for p in pairs])


def fig1b(in_dir: Path, fig):
    tr = read_table(in_dir / "trace.csv", ("t_ns", "p_f_mean", "p_f_std"))
    keep = tr["t_ns"] >= 0.0
    t, p, s = tr["t_ns"][keep], tr["p_f_mean"][keep], tr["p_f_std"][keep]
    ax = fig.subplots()
    ax.fill_between(t, p - s, p + s, color="#d4b35e", alpha=0.45, lw=0,
                    label="realization spread")
    ax.plot(t, p, color="black", label="cascaded model")
    i = int(np.argmax(p))
    ax.axvline(t[i], color="#888888", ls=":", lw=1.0)
    ax.annotate(f"$t_D$ = {t[i]:.1f} ns", (t[i], p[i]),
                xytext=(t[i] + 5, p[i]), fontsize=8)
    ax.set_xlabel("time after pulse switch-off (ns)")
    ax.set_ylabel(r"$P_f$ (photons/ns)")
    ax.set_xlim(t[0], t[-1])
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    fig.set_size_inches(5.2, 3.2)


def fig2(in_dir: Path, fig):
    scan = read_table(
        in_dir / "scan_n.csv", ("n_atoms", "p_max", "t_delay_ns", "eta_f")
    )
    n = scan["n_atoms"]
    traces = sorted(glob.glob(str(in_dir / "trace_N*.csv")))
    if not traces:
        raise SchemaError(f"no trace_N*.csv files in {in_dir}")
    picks = [int(re.search(r"trace_N(\d+)", p).group(1)) for p in traces]
    order = np.argsort(picks)
    idx = [order[k] for k in np.linspace(0, len(order) - 1, min(4, len(order))).astype(int)]

    axes = fig.subplots(3, 2)
    for ax, j in zip(axes[:2].ravel(), idx):
        tr = read_table(Path(traces[j]), ("t_ns", "p_f_mean"))
        keep = tr["t_ns"] >= 0.0
        ax.plot(tr["t_ns"][keep], tr["p_f_mean"][keep], color="black")
        ax.set_title(f"N = {picks[j]}")
        ax.set_xlabel("t (ns)")
        ax.set_ylabel(r"$P_f$")
        ax.set_ylim(bottom=0)

    summary = {}
    spath = in_dir / "summary.json"
    if spath.exists():
        summary = json.loads(spath.read_text())

    ax_p = axes[2, 0]
    ax_p.loglog(n, scan["p_max"], "o", color="#5a2d82", ms=4)
    ax_p.set_xlabel("N")
    ax_p.set_ylabel(r"$P_f^{max}$ (photons/ns)")
    ax_e = axes[2, 1]
    ax_e.loglog(n, scan["eta_f"], "D", color="#d07c2e", ms=4)
    ax_e.set_xlabel("N")
    ax_e.set_ylabel(r"$\eta_f$")
    if "n_threshold" in summary:
        for ax in (ax_p, ax_e):
            ax.axvline(summary["n_threshold"], color="#aa3333", ls="-.", lw=1.0)
        ax_p.set_title(
            "exponents %.2f / %.2f, knee N = %.0f"
            % (
                summary.get("exponent_below", float("nan")),
                summary.get("exponent_above", float("nan")),
                summary["n_threshold"],
            ),
            fontsize=8,
        )
    fig.set_size_inches(6.4, 7.2)


def fig3(in_dir: Path, fig):
    norm = read_table(in_dir / "traces_norm.csv", ("t_ns",))
    areas, matrix = area_columns(norm, "p_norm_A")
    scan = read_table(in_dir / "scan_area.csv", ("area_pi", "t_delay_ns"))
    t = norm["t_ns"]
    ax = fig.subplots()
    mesh = ax.pcolormesh(
        areas, t, matrix, cmap="inferno", vmin=0.0, vmax=1.0, shading="nearest"
    )
    ax.plot(scan["area_pi"], scan["t_delay_ns"], color="white", ls="--", lw=1.2,
            label=r"$t_D(A)$")
    ax.set_xlabel(r"pulse area $A/\pi$")
    ax.set_ylabel("t (ns)")
    ax.set_ylim(t[0], min(t[-1], 40.0))
    ax.legend(frameon=False, labelcolor="white")
    fig.colorbar(mesh, ax=ax, label=r"$P_f / P_f^{max}$")
    fig.set_size_inches(5.0, 3.6)


def fig4(in_dir: Path, fig):
    xc = read_table(in_dir / "xcorr.csv", ("tau_ns",))
    areas, matrix = area_columns(xc, "x_mod_A")
    scan = read_table(
        in_dir / "scan_area.csv", ("area_pi", "t_delay_ns", "coherence_amplitude")
    )
    tau = xc["tau_ns"]
    targets = [0.93, areas[np.argmax(scan["t_delay_ns"])], 1.25]
    axes = fig.subplots(4, 1)
    for ax, a_want in zip(axes[:3], targets):
        j = int(np.argmin(np.abs(areas - a_want)))
        ax.plot(tau, matrix[:, j], color="#2d5a82")
        ax.axhline(0.0, color="#999999", lw=0.6)
        ax.set_ylabel(r"$\mathcal{X}(\tau)\cos(\Omega_{LO}\tau)$")
        ax.set_title(f"A = {areas[j]:.2f} $\\pi$", fontsize=8)
        ax.set_ylim(-1.05, 1.05)
    axes[2].set_xlabel(r"$\tau$ (ns)")

    ax = axes[3]
    ax.plot(scan["area_pi"], np.abs(scan["coherence_amplitude"]), "D-",
            color="#5a2d82", ms=4, label=r"$|\langle\mathcal{X}\rangle_\tau|$")
    ax.set_xlabel(r"pulse area $A/\pi$")
    ax.set_ylabel(r"$|\langle\mathcal{X}\rangle_\tau|$", color="#5a2d82")
    ax2 = ax.twinx()
    ax2.plot(scan["area_pi"], scan["t_delay_ns"], "o-", color="#d07c2e", ms=4,
             label=r"$t_D$")
    ax2.set_ylabel(r"$t_D$ (ns)", color="#d07c2e")
    fig.set_size_inches(5.0, 8.4)


RECIPES = {"fig1b": fig1b, "fig2": fig2, "fig3": fig3, "fig4": fig4}


def render(recipe: str, in_dir, out_file) -> Path:
    """Render one recipe to an image file and return its path."""
    if recipe not in RECIPES:
        raise SchemaError(f"unknown recipe {recipe!r}; choose from {sorted(RECIPES)}")
    in_dir = Path(in_dir)
    out_file = Path(out_file)
    with plt.rc_context(_RC):
        fig = plt.figure()
        try:
            RECIPES[recipe](in_dir, fig)
            fig.tight_layout()
            out_file.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out_file, metadata={"Software": "burstfigs"})
        finally:
            plt.close(fig)
    return out_file


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="superburst-figs",
        description="Regenerate paper-style figure panels from run outputs",
    )
    ap.add_argument("--recipe", required=True, choices=sorted(RECIPES))
    ap.add_argument("--in", dest="in_dir", required=True, help="run output directory")
    ap.add_argument("--out", required=True, help="image file to write")
    args = ap.parse_args(argv)
    try:
        render(args.recipe, args.in_dir, args.out)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
