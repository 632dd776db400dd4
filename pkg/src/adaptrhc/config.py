"""Scenario files, built-in presets and ``--set`` overrides.

A scenario file is TOML::

    [model]
    unknown = ["s", "mu1", "k"]
    [model.params]
    s = 36.0                       # or {base = 36.0, depth = 0.9, omega = 0.00314159}
    d = 0.108
    ...
    [init]
    x0 = [1000.0, 10.0, 1000.0]
    y0 = [200.0, 50.0, 20000.0]
    theta0 = [1.0, 1.0, 1.0]
    [nrhc]
    Q = [1.0, 1.0, 1.0]            # diagonal
    R = [1.0, 1.0, 1.0]            # diagonal
    T_f = 0.1
    alpha = 0.01
    A_s = 60.0                     # times identity
    t_s = 0.01
    N_tau = 20
    [run]
    duration = 100.0
    [output]
    csv = "case1.csv"
    svg = "case1.svg"
"""
from __future__ import annotations

import copy
import math
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .model import PARAM_NAMES, Constant, Sinusoid, canonical_unknowns
from .nrhc import NrhcConfig


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


_TRUE_PARAMS = {"s": 36.0, "d": 0.108, "beta": 9e-5, "mu1": 0.5, "k": 500.0, "mu2": 3.0}

_CASE1 = {
    "model": {"unknown": ["s", "mu1", "k"], "params": dict(_TRUE_PARAMS)},
    "init": {"x0": [1000.0, 10.0, 1000.0], "y0": [200.0, 50.0, 20000.0], "theta0": [1.0, 1.0, 1.0]},
    "nrhc": {"Q": [1.0, 1.0, 1.0], "R": [1.0, 1.0, 1.0], "T_f": 0.1, "alpha": 0.01,
             "A_s": 60.0, "t_s": 0.01, "N_tau": 20, "stepper": "rk4"},
    "run": {"duration": 100.0, "pe_window": 5.0, "substeps": 1},
    "output": {"csv": "case1.csv", "svg": "case1.svg"},
}

_CASE2 = copy.deepcopy(_CASE1)
_CASE2["model"]["params"]["s"] = {"base": 36.0, "depth": 0.9, "omega": math.pi / 1000.0}
_CASE2["run"]["duration"] = 1000.0
_CASE2["output"] = {"csv": "case2.csv", "svg": "case2.svg"}

PRESETS = {"case1": _CASE1, "case2": _CASE2}

_SCHEMA = {
    "model": {"unknown", "params"},
    "init": {"x0", "y0", "theta0"},
    "nrhc": {"Q", "R", "T_f", "alpha", "A_s", "t_s", "N_tau", "stepper",
             "divergence_threshold", "estimator_gain"},
    "run": {"duration", "pe_window", "substeps", "measurements"},
    "output": {"csv", "svg"},
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def load_config(source: str) -> tuple[str, dict]:
    """Resolve a preset name or a TOML path to ``(name, config dict)``."""
    if source in PRESETS:
        return source, preset(source)
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"config file not found: {source}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if isinstance(data.get("run", {}).get("measurements"), str):
        meas = Path(data["run"]["measurements"])
        if not meas.is_absolute():
            data["run"]["measurements"] = str(path.parent / meas)
    return path.stem, data


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    """Apply ``section.key=value`` (value in TOML syntax, bare strings allowed)."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) < 2 or parts[0] not in _SCHEMA:
        raise ConfigError(f"override key {key.strip()!r} must be section.key with section in "
                          f"{sorted(_SCHEMA)}")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override key {key.strip()!r} does not name a table entry")
    node[parts[-1]] = _parse_value(text.strip())


def _number(cfg, section, key, default=None, positive=True):
    value = cfg.get(section, {}).get(key, default)
    if value is None:
        raise ConfigError(f"missing required key {section}.{key}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{section}.{key} must be > 0")
    return value


def _vector(cfg, section, key, length=None):
    value = cfg.get(section, {}).get(key)
    if value is None:
        raise ConfigError(f"missing required key {section}.{key}")
    if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{section}.{key} must be a list of numbers")
    arr = np.array(value, dtype=float)
    if not np.isfinite(arr).all():
        raise ConfigError(f"{section}.{key} must contain only finite numbers")
    if length is not None and arr.size != length:
        raise ConfigError(f"{section}.{key} must have {length} entries, got {arr.size}")
    return arr


def _signal(name, entry):
    key = f"model.params.{name}"
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        if not (math.isfinite(entry) and entry > 0):
            raise ConfigError(f"{key} must be finite and > 0")
        return Constant(float(entry))
    if isinstance(entry, dict):
        extra = set(entry) - {"base", "depth", "omega"}
        if extra or len(entry) != 3:
            raise ConfigError(f"{key} must be a number or a table with base, depth, omega")
        vals = {}
        for k in ("base", "depth", "omega"):
            v = entry[k]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{key}.{k} must be a finite number")
            vals[k] = float(v)
        return Sinusoid(**vals)
    raise ConfigError(f"{key} must be a number or a table with base, depth, omega")


def validate(cfg: dict) -> None:
    for section, body in cfg.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")


def build_scenario(cfg: dict, name: str = "scenario"):
    from .sim import Scenario, load_measurements

    validate(cfg)
    model = cfg.get("model", {})
    unknown = model.get("unknown")
    if not isinstance(unknown, list) or not all(isinstance(u, str) for u in unknown):
        raise ConfigError("model.unknown must be a list of parameter names")
    try:
        unknown = canonical_unknowns(unknown)
    except ValueError as exc:
        raise ConfigError(f"model.unknown: {exc}") from None
    params = model.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("model.params must be a table")
    for key in params:
        if key not in PARAM_NAMES:
            raise ConfigError(f"unknown key model.params.{key}")
    signals = {}
    for pname in PARAM_NAMES:
        if pname not in params:
            raise ConfigError(f"missing required key model.params.{pname}")
        signals[pname] = _signal(pname, params[pname])
        if pname not in unknown and not isinstance(signals[pname], Constant):
            raise ConfigError(f"model.params.{pname}: known parameters must be constant")

    x0 = _vector(cfg, "init", "x0", 3)
    y0 = _vector(cfg, "init", "y0", 3)
    theta0 = _vector(cfg, "init", "theta0", len(unknown))

    q = _vector(cfg, "nrhc", "Q", 3)
    r = _vector(cfg, "nrhc", "R", 3)
    for key, diag in (("Q", q), ("R", r)):
        if (diag <= 0).any():
            raise ConfigError(f"nrhc.{key} diagonal entries must be > 0")
    n_tau = cfg.get("nrhc", {}).get("N_tau", 20)
    if isinstance(n_tau, bool) or not isinstance(n_tau, int) or n_tau < 1:
        raise ConfigError("nrhc.N_tau must be an integer >= 1")
    stepper = cfg.get("nrhc", {}).get("stepper", "rk4")
    try:
        nrhc_cfg = NrhcConfig.diagonal(
            q, r, a_s=_number(cfg, "nrhc", "A_s", 60.0),
            T_f=_number(cfg, "nrhc", "T_f", 0.1), alpha=_number(cfg, "nrhc", "alpha", 0.01),
            t_s=_number(cfg, "nrhc", "t_s", 0.01), N_tau=n_tau, stepper=stepper,
            divergence_threshold=_number(cfg, "nrhc", "divergence_threshold", 1e6),
            estimator_gain=_number(cfg, "nrhc", "estimator_gain", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"nrhc: {exc}") from None

    duration = _number(cfg, "run", "duration")
    pe_window = _number(cfg, "run", "pe_window", 5.0)
    substeps = cfg.get("run", {}).get("substeps", 1)
    if isinstance(substeps, bool) or not isinstance(substeps, int) or substeps < 1:
        raise ConfigError("run.substeps must be an integer >= 1")
    measurements = cfg.get("run", {}).get("measurements")
    if measurements is not None:
        if not isinstance(measurements, str):
            raise ConfigError("run.measurements must be a path")
        try:
            measurements = load_measurements(measurements, nrhc_cfg.t_s)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"run.measurements: {exc}") from None

    out = cfg.get("output", {})
    for key in ("csv", "svg"):
        if key in out and not isinstance(out[key], str):
            raise ConfigError(f"output.{key} must be a path string")
    try:
        return Scenario(
            params=signals, unknown=unknown, x0=x0, y0=y0, theta0=theta0, cfg=nrhc_cfg,
            duration=duration, name=name, pe_window=pe_window, substeps=substeps,
            measurements=measurements, output_csv=out.get("csv"), output_svg=out.get("svg"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
