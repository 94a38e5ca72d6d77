"""Shared inputs for figure tests.

Uses the acceptance-run outputs of the simulator when they exist
(<repo>/acceptance_runs, written by the primary acceptance suite);
otherwise generates small runs through the superburst CLI so the file
schemas are the real ones.
"""

import os
from pathlib import Path

import pytest

from superburst.cli import main as superburst_main

REPO_ROOT = Path(__file__).resolve().parents[2]
ACCEPT_DIR = Path(os.environ.get("SUPERBURST_ACCEPT_DIR", REPO_ROOT / "acceptance_runs"))

SMALL_BASE = """
[physics]
n_atoms = 24
n_phi = 8

[grid]
t_end_ns = 60.0
dt_pulse_ns = 0.05
dt_decay_ns = 0.2

[disorder]
n_realizations = 4
seed = 31
"""


def _run(args):
    rc = superburst_main([str(a) for a in args])
    assert rc == 0, args


@pytest.fixture(scope="session")
def trace_dir(tmp_path_factory):
    existing = ACCEPT_DIR / "fig1b"
    if (existing / "trace.csv").exists():
        return existing
    cfg = tmp_path_factory.mktemp("cfg") / "base.ini"
    cfg.write_text(SMALL_BASE)
    out = tmp_path_factory.mktemp("runs") / "fig1b"
    _run(["simulate", "--config", cfg, "--out", out])
    return out


@pytest.fixture(scope="session")
def scan_n_dir(tmp_path_factory):
    existing = ACCEPT_DIR / "scan_n"
    if (existing / "scan_n.csv").exists():
        return existing
    cfg = tmp_path_factory.mktemp("cfg") / "base.ini"
    cfg.write_text(SMALL_BASE)
    out = tmp_path_factory.mktemp("runs") / "scan_n"
    _run(["scan-n", "--config", cfg, "--out", out,
          "--n-list", "4,6,8,12,16,20,24"])
    return out


@pytest.fixture(scope="session")
def scan_area_dir(tmp_path_factory):
    existing = ACCEPT_DIR / "scan_area"
    if (existing / "scan_area.csv").exists():
        return existing
    cfg = tmp_path_factory.mktemp("cfg") / "base.ini"
    cfg.write_text(SMALL_BASE)
    out = tmp_path_factory.mktemp("runs") / "scan_area"
    _run(["scan-area", "--config", cfg, "--out", out,
          "--areas-pi", "0.85:1.25:0.08"])
    return out
