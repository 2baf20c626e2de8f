"""Experiment configuration files.

A configuration is a TOML document.  Top-level ``kind`` selects the
experiment; tables ``[grid]``, ``[law]``, ``[drift]``, ``[seed]`` and
``[run]`` hold its parameters, and ``[gibbs]`` describes a finite-alphabet
model.  Example::

    kind = "simulate"

    [grid]
    horizon = 1.0
    n_steps = 100

    [law]
    type = "gaussian"      # gaussian | point | uniform_ball
    mean = [0.0]
    variance = [1.0]

    [drift]
    family = "pair"        # pair | ou | zero | constant
    exponent = -0.4
    sign = -1
    truncation = 0.05

    [seed]
    master = 7

    [run]
    N = 256
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .kernels import (
    constant_drift,
    ou_drift,
    pair_drift,
    spec_admissibility,
    zero_drift,
)
from .paths import Gaussian, PointMass, SeedSpec, TimeGrid, UniformBall

KINDS = ("simulate", "mckv-solve", "poc-study", "verify-moments",
         "rate-estimate", "gibbs-lab")

# Keys accepted in each table; anything else is rejected as a typo.
_KEYS = {
    "grid": {"horizon", "n_steps"},
    "law": {"type", "mean", "variance", "point", "center", "radius"},
    "drift": {"family", "exponent", "sign", "strength", "cutoff", "truncation",
              "cap", "mollify_radius", "theta", "c"},
    "seed": {"master", "replica"},
    "run": {"N", "M", "replicas", "N_list", "reference_N", "tol", "m_exponent",
            "max_iter", "damping", "sampling", "lambdas", "betas",
            "allow_inadmissible", "noise", "n_projections"},
    "gibbs": {"mu0", "V", "V_csv", "N", "N_list", "grid_resolution", "betas",
              "set_index", "set_threshold"},
    "output": {"dir"},
}


@dataclass
class ExperimentConfig:
    kind: str
    raw: dict
    grid: TimeGrid | None = None
    law: object = None
    drift: object = None
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0))
    run: dict = field(default_factory=dict)
    gibbs: dict = field(default_factory=dict)
    out_dir: str | None = None


def _table(raw, name):
    tab = raw.get(name, {})
    if not isinstance(tab, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(tab) - _KEYS[name]
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return tab


def _vec(value, name):
    try:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be a flat list")
    return arr


def _parse_law(tab):
    kind = tab.get("type", "gaussian")
    if kind == "gaussian":
        mean = _vec(tab.get("mean", [0.0]), "law.mean")
        var = _vec(tab.get("variance", np.ones(mean.size)), "law.variance")
        return Gaussian(mean, var)
    if kind == "point":
        return PointMass(_vec(tab.get("point", [0.0]), "law.point"))
    if kind == "uniform_ball":
        return UniformBall(_vec(tab.get("center", [0.0]), "law.center"),
                           float(tab.get("radius", 1.0)))
    raise ConfigError(f"unknown law type {kind!r}")


def _parse_drift(tab):
    fam = tab.get("family", "zero")
    if fam == "zero":
        return zero_drift()
    if fam == "constant":
        return constant_drift(_vec(tab.get("c", [0.0]), "drift.c"))
    if fam == "ou":
        return ou_drift(float(tab.get("theta", 1.0)))
    if fam == "pair":
        if "exponent" not in tab:
            raise ConfigError("pair drift needs an exponent")
        return pair_drift(
            float(tab["exponent"]),
            sign=float(tab.get("sign", 1)),
            strength=float(tab.get("strength", 1.0)),
            cutoff=float(tab.get("cutoff", math.inf)),
            truncation=tab.get("truncation"),
            cap=tab.get("cap"),
            mollify_radius=float(tab.get("mollify_radius", 0.0)),
        )
    raise ConfigError(f"unknown drift family {fam!r}")


def _read_table_csv(path):
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return rows


def parse_config(raw, base_dir=".", seed_override=None, out_dir=None):
    """Validate a parsed TOML mapping and build an :class:`ExperimentConfig`.

    Admissibility of the drift is checked here unless
    ``run.allow_inadmissible`` is set.
    """
    raw = copy.deepcopy(raw)
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    unknown = set(raw) - set(_KEYS) - {"kind"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if seed_override is not None:
        raw.setdefault("seed", {})["master"] = int(seed_override)
    if out_dir is not None:
        raw.setdefault("output", {})["dir"] = str(out_dir)
    seed_tab = _table(raw, "seed")
    cfg = ExperimentConfig(
        kind, raw,
        seed=SeedSpec(int(seed_tab.get("master", 0)), int(seed_tab.get("replica", 0))),
        run=dict(_table(raw, "run")),
        out_dir=_table(raw, "output").get("dir"),
    )
    if kind == "gibbs-lab":
        gib = dict(_table(raw, "gibbs"))
        if "V_csv" in gib:
            gib["V"] = _read_table_csv(os.path.join(base_dir, gib.pop("V_csv")))
            # inline the table so the manifest alone reproduces the run
            raw["gibbs"] = dict(gib)
        if "mu0" not in gib or "V" not in gib:
            raise ConfigError("[gibbs] needs mu0 and V (or V_csv)")
        cfg.gibbs = gib
        return cfg
    grid_tab = _table(raw, "grid")
    cfg.grid = TimeGrid(float(grid_tab.get("horizon", 1.0)),
                        int(grid_tab.get("n_steps", 100)))
    cfg.law = _parse_law(_table(raw, "law"))
    cfg.drift = _parse_drift(_table(raw, "drift"))
    if not cfg.run.get("allow_inadmissible", False):
        ok, reason = spec_admissibility(cfg.drift, cfg.law.dim)
        if not ok:
            raise ConfigError(f"inadmissible drift: {reason}")
    return cfg


def load_config(path, seed_override=None, out_dir=None):
    """Read a TOML config file (or a run manifest holding a ``config`` table)."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if str(path).endswith(".json"):
        try:
            raw = json.loads(data)["config"]
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{path} is not a run manifest") from exc
    else:
        try:
            raw = tomllib.loads(data.decode())
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, os.path.dirname(os.path.abspath(path)),
                        seed_override, out_dir)
