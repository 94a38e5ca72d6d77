"""Run-configuration parsing and serialization.

The configuration is a flat-sectioned plain-text file (INI syntax) with
sections physics, pulse, grid, disorder, heterodyne, output; a JSON
file holding the same sections as nested objects is accepted as an
alternative encoding. Unknown sections or keys are rejected so typos
fail loudly. serialize -> parse round-trips every semantic field.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .cascade import DEFAULT_N_PHI, Preparation
from .disorder import DisorderPlan, TruncatedGaussian
from .errors import ConfigError
from .grid import TimeGrid
from .heterodyne import HeterodyneConfig
from .params import (
    BETA_MEAN_DEFAULT,
    BETA_STD_DEFAULT,
    DRIVEN_PULSE,
    GAMMA_DEFAULT,
    IDEAL_INSTANT,
    PhysicalParams,
    PulseSpec,
    RECTANGULAR,
)

_SCHEMA = {
    "physics": {
        "gamma": (float, GAMMA_DEFAULT),
        "n_atoms": (int, 1000),
        "n_phi": (int, DEFAULT_N_PHI),
    },
    "pulse": {
        "mode": (str, DRIVEN_PULSE),
        "area_pi": (float, 1.0),
        "duration_ns": (float, 4.0),
        "shape": (str, RECTANGULAR),
        "ramp_ns": (float, 0.5),
    },
    "grid": {
        "t_start_ns": (float, -4.0),
        "t_end_ns": (float, 150.0),
        "dt_pulse_ns": (float, 0.02),
        "dt_decay_ns": (float, 0.1),
    },
    "disorder": {
        "beta_mean": (float, BETA_MEAN_DEFAULT),
        "beta_std": (float, BETA_STD_DEFAULT),
        "n_realizations": (int, 100),
        "seed": (int, 0),
    },
    "heterodyne": {
        "p_lo": (float, 500.0),
        "lo_freq_mhz": (float, 230.0),
        "polarization_overlap": (float, 1.0),
        "t_ref_ns": (float, -2.0),
        "mc_repetitions": (int, 0),
        "mc_bin_width_ns": (float, 0.2),
    },
    "output": {
        "directory": (str, ""),
        "overwrite": (bool, False),
    },
}


@dataclass
class RunConfig:
    """Typed view of one configuration file."""

    params: PhysicalParams
    prep: Preparation
    grid: TimeGrid
    plan: DisorderPlan
    n_phi: int
    heterodyne: HeterodyneConfig
    t_ref: float
    mc_repetitions: int
    mc_bin_width: float
    out_dir: Optional[str]
    overwrite: bool
    raw: dict

    @property
    def seed(self) -> int:
        return self.plan.seed


def _coerce(value, typ, where: str):
    try:
        if typ is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("true", "yes", "on", "1"):
                return True
            if text in ("false", "no", "off", "0"):
                return False
            raise ValueError(value)
        out = typ(value)
        if typ is float and not math.isfinite(out):
            raise ValueError(value)
        return out
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {where}: {value!r}") from exc


def _merge_defaults(data: dict) -> dict:
    merged = {}
    for section, keys in _SCHEMA.items():
        given = data.get(section, {})
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
            )
        merged[section] = {
            key: _coerce(given.get(key, default), typ, f"[{section}] {key}")
            for key, (typ, default) in keys.items()
        }
    unknown_sections = set(data) - set(_SCHEMA)
    if unknown_sections:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown_sections))}")
    return merged


def dict_to_config(data: dict) -> RunConfig:
    merged = _merge_defaults(data)
    phys = merged["physics"]
    pulse = merged["pulse"]
    gridsec = merged["grid"]
    dis = merged["disorder"]
    het = merged["heterodyne"]
    out = merged["output"]

    params = PhysicalParams(
        gamma=phys["gamma"],
        beta_nominal=dis["beta_mean"],
        n_atoms=phys["n_atoms"],
    )
    area = pulse["area_pi"] * math.pi
    if pulse["mode"] == DRIVEN_PULSE:
        prep = Preparation.driven(
            PulseSpec(
                area=area,
                duration=pulse["duration_ns"],
                shape=pulse["shape"],
                ramp_time=pulse["ramp_ns"],
            )
        )
        t_start = gridsec["t_start_ns"]
    elif pulse["mode"] == IDEAL_INSTANT:
        prep = Preparation.ideal(area)
        t_start = 0.0
    else:
        raise ConfigError(f"unknown preparation mode {pulse['mode']!r}")
    grid = TimeGrid(
        t_start=t_start,
        t_end=gridsec["t_end_ns"],
        dt_pulse=gridsec["dt_pulse_ns"],
        dt_decay=gridsec["dt_decay_ns"],
    )
    plan = DisorderPlan(
        dist=TruncatedGaussian(dis["beta_mean"], dis["beta_std"]),
        n_realizations=dis["n_realizations"],
        seed=dis["seed"],
    )
    het_cfg = HeterodyneConfig(
        p_lo=het["p_lo"],
        omega_lo=2.0 * math.pi * het["lo_freq_mhz"] / 1000.0,
        polarization_overlap=het["polarization_overlap"],
    )
    return RunConfig(
        params=params,
        prep=prep,
        grid=grid,
        plan=plan,
        n_phi=phys["n_phi"],
        heterodyne=het_cfg,
        t_ref=het["t_ref_ns"],
        mc_repetitions=het["mc_repetitions"],
        mc_bin_width=het["mc_bin_width_ns"],
        out_dir=out["directory"] or None,
        overwrite=out["overwrite"],
        raw=merged,
    )


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("JSON config must be an object of sections")
    else:
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"invalid config file: {exc}") from exc
        data = {s: dict(cp.items(s)) for s in cp.sections()}
    return dict_to_config(data)


def config_to_dict(cfg: RunConfig) -> dict:
    """Canonical nested-dict form (the JSON encoding)."""
    return {s: dict(kv) for s, kv in cfg.raw.items()}


def write_config_json(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def write_config_ini(cfg: RunConfig, path) -> None:
    lines = []
    for section, kv in config_to_dict(cfg).items():
        lines.append(f"[{section}]")
        for key, value in kv.items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    Path(path).write_text("\n".join(lines))
