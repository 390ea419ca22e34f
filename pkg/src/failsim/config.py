"""Experiment configuration files.

The format is TOML with a fixed key set::

    [system]       lambda0, eta, gamma, mode, degradation_time_unit (optional)
    [[components]] name, H, D, alpha, beta, w_mean, w_std, y_mean, y_std, u
    [costs]        c_i, c_r, c_rho
    [sim]          replications, max_shocks, path_steps, seed, truncation_tol
    [grids]        t_min, t_max, t_points, tau_min, tau_max, tau_points

``beta`` is the gamma *rate* (a scale ``theta`` converts as ``1/theta``).
``y_mean = y_std = 0`` declares a component whose shocks add no damage.
``mode`` is ``"poisson"``/``"facilitation"`` (or 1/2).  Unknown keys are
rejected.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import DomainError, ValidationError
from .maintenance import TauGrid
from .model import (FACILITATION, POISSON, ComponentSpec, CostModel, InitialAges, SystemSpec, system_violations,
                    validate_system)
from .reliability import SimConfig
from .stochastic import FacilitationParams, GammaProcessParams, NormalParams

SCHEMA = {
    "system": {"lambda0", "eta", "gamma", "mode", "degradation_time_unit"},
    "components": {"name", "H", "D", "alpha", "beta", "w_mean", "w_std", "y_mean", "y_std", "u"},
    "costs": {"c_i", "c_r", "c_rho"},
    "sim": {"replications", "max_shocks", "path_steps", "seed", "truncation_tol"},
    "grids": {"t_min", "t_max", "t_points", "tau_min", "tau_max", "tau_points"},
}
OPTIONAL = {"system": {"degradation_time_unit"}}


class ConfigError(ValidationError):
    """Configuration could not be parsed or fails validation."""


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemSpec
    ages: InitialAges
    costs: CostModel
    sim: SimConfig
    tau_grid: TauGrid
    digest: str
    source: str = ""


def default_config_path() -> Path:
    return Path(str(resources.files("failsim") / "data" / "servo_valve.cfg"))


def default_scenarios_path() -> Path:
    return Path(str(resources.files("failsim") / "data" / "servo_valve_scenarios.csv"))


def _number(errors, path, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append((path, f"expected a number, got {type(value).__name__}"))
        return None
    if integer:
        if isinstance(value, float) and not value.is_integer():
            errors.append((path, f"expected an integer, got {value!r}"))
            return None
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        errors.append((path, f"must be finite, got {value!r}"))
        return None
    return value


def _section(errors, doc, name):
    sec = doc.get(name)
    if not isinstance(sec, dict):
        errors.append((name, "missing section"))
        return None
    _check_keys(errors, sec, name, name)
    return sec


def _check_keys(errors, table, kind, path):
    allowed = SCHEMA[kind]
    for key in table:
        if key not in allowed:
            errors.append((f"{path}.{key}", f"unknown key {key!r}"))
    for key in sorted(allowed - OPTIONAL.get(kind, set())):
        if key not in table:
            errors.append((f"{path}.{key}", "missing key"))


def _build(errors, path, factory, *args):
    if any(a is None for a in args):
        return None
    try:
        return factory(*args)
    except DomainError as exc:
        errors.append((path, str(exc)))
        return None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    if not text.strip():
        raise ConfigError([(source, "parse error: empty configuration file")])
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([(source, f"parse error: {exc}")]) from None

    errors = []
    for key in doc:
        if key not in SCHEMA:
            errors.append((key, f"unknown key {key!r}"))
    sys_sec = _section(errors, doc, "system")
    costs_sec = _section(errors, doc, "costs")
    sim_sec = _section(errors, doc, "sim")
    grid_sec = _section(errors, doc, "grids")
    comps_raw = doc.get("components")
    if not isinstance(comps_raw, list) or not comps_raw:
        errors.append(("components", "at least one [[components]] table is required"))
        comps_raw = []

    shock = mode = None
    time_unit = 1.0
    if sys_sec is not None:
        g = lambda k: _number(errors, f"system.{k}", sys_sec[k]) if k in sys_sec else None
        shock = _build(errors, "system", FacilitationParams, g("lambda0"), g("eta"), g("gamma"))
        raw_mode = sys_sec.get("mode")
        mode = {1: POISSON, 2: FACILITATION, POISSON: POISSON, FACILITATION: FACILITATION}.get(raw_mode)
        if "mode" in sys_sec and mode is None:
            errors.append(("system.mode", f"expected 'poisson' or 'facilitation', got {raw_mode!r}"))
        if "degradation_time_unit" in sys_sec:
            time_unit = _number(errors, "system.degradation_time_unit", sys_sec["degradation_time_unit"])

    components, ages = [], []
    for i, c in enumerate(comps_raw):
        p = f"components[{i}]"
        if not isinstance(c, dict):
            errors.append((p, "expected a table"))
            continue
        _check_keys(errors, c, "components", p)
        num = {k: _number(errors, f"{p}.{k}", c[k]) for k in SCHEMA["components"] - {"name"} if k in c}
        name = c.get("name", f"c{i + 1}")
        if not isinstance(name, str):
            errors.append((f"{p}.name", "expected a string"))
        degr = _build(errors, f"{p}.alpha/beta", GammaProcessParams, num.get("alpha"), num.get("beta"), time_unit)
        w = _build(errors, f"{p}.w_mean/w_std", NormalParams, num.get("w_mean"), num.get("w_std"))
        if num.get("y_mean") == 0 and num.get("y_std") == 0:
            y = None
        else:
            y = _build(errors, f"{p}.y_mean/y_std", NormalParams, num.get("y_mean"), num.get("y_std"))
            if y is None and "y_std" in num:
                continue
        components.append(ComponentSpec(str(name), num.get("H", math.nan), num.get("D", math.nan), degr, w, y))
        ages.append(num.get("u", math.nan))

    costs = None
    if costs_sec is not None:
        vals = [_number(errors, f"costs.{k}", costs_sec[k]) if k in costs_sec else None for k in ("c_i", "c_r", "c_rho")]
        costs = CostModel(*vals) if None not in vals else None

    sim = tau = None
    if sim_sec is not None and grid_sec is not None:
        s = {k: _number(errors, f"sim.{k}", sim_sec[k], integer=k in ("replications", "max_shocks", "path_steps", "seed"))
             for k in SCHEMA["sim"] if k in sim_sec}
        gr = {k: _number(errors, f"grids.{k}", grid_sec[k], integer=k.endswith("points"))
              for k in SCHEMA["grids"] if k in grid_sec}
        if None not in s.values() and None not in gr.values() and len(s) == 5 and len(gr) == 6:
            try:
                if not (0 < gr["t_min"] < gr["t_max"]) or gr["t_points"] < 2:
                    raise DomainError("need 0 < t_min < t_max and t_points >= 2")
                t_grid = np.geomspace(gr["t_min"], gr["t_max"], gr["t_points"])
                sim = SimConfig(replications=s["replications"], max_shocks=s["max_shocks"], t_grid=tuple(t_grid),
                                seed=s["seed"], path_steps=s["path_steps"], truncation_tol=s["truncation_tol"])
            except DomainError as exc:
                errors.append(("sim/grids", str(exc)))
            tau = _build(errors, "grids.tau_*", TauGrid, gr["tau_min"], gr["tau_max"], gr["tau_points"])

    if errors:
        # add the invariant checks that can still run, so every problem is reported at once
        partial = SystemSpec(tuple(components), shock, mode or FACILITATION)
        seen = {p for p, _ in errors}
        for p, m in system_violations(partial, InitialAges(tuple(ages)), costs or CostModel(1.0, 1.0, 1.0)):
            if p not in seen and "missing" not in m:
                errors.append((p, m))
        raise ConfigError([(f"{source}: {p}", m) for p, m in errors])

    system = SystemSpec(tuple(components), shock, mode)
    initial = InitialAges(tuple(ages))
    try:
        validate_system(system, initial, costs)
    except ValidationError as exc:
        raise ConfigError([(f"{source}: {p}", m) for p, m in exc.violations]) from None
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ExperimentConfig(system, initial, costs, sim, tau, digest, source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([(str(path), f"cannot read: {exc.strerror or exc}")]) from None
    return parse_config(text, str(path))
