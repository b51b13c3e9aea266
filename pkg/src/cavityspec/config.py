"""Run configuration from TOML text.

A config is a flat TOML document for the physical rates plus optional
tables::

    g0 = 8.0            # required for spectrum/sweep runs
    kappa = 1.6
    gamma = 0.32
    gamma_p = 0.0       # default 0
    delta = 0.0         # default 0
    backend = "regression"   # closed_form | regression | monte_carlo
    workers = 1

    [grid]      dt, n_omega, omega_min, omega_max, tol
    [ensemble]  n_traj, seed, batch_count
    [output]    dir, stem, svg, mix
    [mech]      k_c, g_c, kappa_c, drive_freq, jump_rate, amplitude,
                t_max, dt, discard, seed

Every error names the offending key and, when it appears in the text, its
line number.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import BACKENDS
from .mechanical import MechParams
from .model import CavitySpecError, SystemParams
from .stochastic import EnsembleConfig


class ConfigError(CavitySpecError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where = f"{key}"
            if line is not None:
                where += f" (line {line})"
            where += ": "
        super().__init__(where + message)


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class ConstraintViolation(ConfigError):
    pass


_FLOAT, _INT, _STR, _BOOL = "float", "int", "str", "bool"

_SCHEMA = {
    "": {
        "g0": _FLOAT,
        "kappa": _FLOAT,
        "gamma": _FLOAT,
        "gamma_p": _FLOAT,
        "delta": _FLOAT,
        "backend": _STR,
        "workers": _INT,
    },
    "grid": {"dt": _FLOAT, "n_omega": _INT, "omega_min": _FLOAT, "omega_max": _FLOAT, "tol": _FLOAT},
    "ensemble": {"n_traj": _INT, "seed": _INT, "batch_count": _INT},
    "output": {"dir": _STR, "stem": _STR, "svg": _BOOL, "mix": _FLOAT},
    "mech": {
        "k_c": _FLOAT,
        "g_c": _FLOAT,
        "kappa_c": _FLOAT,
        "drive_freq": _FLOAT,
        "jump_rate": _FLOAT,
        "amplitude": _FLOAT,
        "t_max": _FLOAT,
        "dt": _FLOAT,
        "discard": _FLOAT,
        "seed": _INT,
    },
}


@dataclass(frozen=True)
class GridOverrides:
    dt: Optional[float] = None
    n_omega: int = 2048
    omega_min: Optional[float] = None
    omega_max: Optional[float] = None
    tol: float = 1e-6


@dataclass(frozen=True)
class MechRun:
    params: MechParams
    t_max: float = 1000.0
    dt: float = 0.02
    discard: float = 100.0
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    params: Optional[SystemParams]
    backend: str = "regression"
    grid: GridOverrides = field(default_factory=GridOverrides)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    output_dir: Optional[str] = None
    stem: str = "spectrum"
    emit_svg: bool = False
    mix: Optional[float] = None
    workers: int = 1
    mech: Optional[MechRun] = None


_SECTION_RE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def _key_lines(text: str) -> dict:
    lines = {}
    section = ""
    for n, raw in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1)
            lines.setdefault((section, None), n)
            continue
        m = _KEY_RE.match(raw)
        if m:
            lines.setdefault((section, m.group(1)), n)
    return lines


def _check_type(value, kind) -> bool:
    if kind == _FLOAT:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == _INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == _STR:
        return isinstance(value, str)
    return isinstance(value, bool)


def parse_config(text: str, require_system: bool = True) -> RunConfig:
    """Validate a config document and fill in defaults."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigSyntaxError(str(exc), line=int(m.group(1)) if m else None) from None
    lines = _key_lines(text)

    def line_of(section, key):
        return lines.get((section, key))

    def name(section, key):
        return f"{section}.{key}" if section else key

    values: dict = {s: {} for s in _SCHEMA}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in _SCHEMA or key == "":
                raise UnknownKey("unknown table", key=key, line=line_of(key, None))
            for sub, subval in value.items():
                kind = _SCHEMA[key].get(sub)
                if kind is None:
                    raise UnknownKey("unknown key", key=name(key, sub), line=line_of(key, sub))
                if not _check_type(subval, kind):
                    raise TypeMismatch(
                        f"expected {kind}, got {type(subval).__name__}",
                        key=name(key, sub),
                        line=line_of(key, sub),
                    )
                values[key][sub] = float(subval) if kind == _FLOAT else subval
            continue
        kind = _SCHEMA[""].get(key)
        if kind is None:
            raise UnknownKey("unknown key", key=key, line=line_of("", key))
        if not _check_type(value, kind):
            raise TypeMismatch(f"expected {kind}, got {type(value).__name__}", key=key, line=line_of("", key))
        values[""][key] = float(value) if kind == _FLOAT else value

    def violation(msg, section, key):
        return ConstraintViolation(msg, key=name(section, key), line=line_of(section, key))

    top = values[""]
    params = None
    if require_system or any(k in top for k in ("g0", "kappa", "gamma")):
        for key in ("g0", "kappa", "gamma"):
            if key not in top:
                raise ConstraintViolation("required key missing", key=key)
        for key in ("g0", "kappa", "gamma", "gamma_p"):
            if top.get(key, 0.0) < 0:
                raise violation("must be >= 0", "", key)
        if top["kappa"] == 0 and top["gamma"] == 0:
            raise violation("kappa and gamma cannot both be 0", "", "kappa")
        params = SystemParams(
            top["g0"], top["kappa"], top["gamma"], top.get("gamma_p", 0.0), top.get("delta", 0.0)
        )

    backend = top.get("backend", "regression")
    if backend not in BACKENDS:
        raise violation(f"must be one of {', '.join(BACKENDS)}", "", "backend")
    if backend == "closed_form" and params is not None and params.gamma_p > 0:
        raise violation("closed_form backend requires gamma_p = 0", "", "backend")
    workers = top.get("workers", 1)
    if workers < 1:
        raise violation("must be >= 1", "", "workers")

    g = values["grid"]
    if "dt" in g and not g["dt"] > 0:
        raise violation("must be > 0", "grid", "dt")
    if g.get("n_omega", 2048) < 2:
        raise violation("must be >= 2", "grid", "n_omega")
    if ("omega_min" in g) != ("omega_max" in g):
        missing = "omega_max" if "omega_min" in g else "omega_min"
        raise ConstraintViolation("omega_min and omega_max must be given together", key=f"grid.{missing}")
    if "omega_min" in g and not g["omega_max"] > g["omega_min"]:
        raise violation("must exceed grid.omega_min", "grid", "omega_max")
    if not 0 < g.get("tol", 1e-6) < 1:
        raise violation("must lie in (0, 1)", "grid", "tol")
    grid = GridOverrides(**g)

    e = values["ensemble"]
    n_traj = e.get("n_traj", 20_000)
    batch_count = e.get("batch_count", 50)
    if n_traj < 1:
        raise violation("must be >= 1", "ensemble", "n_traj")
    if batch_count < 1 or n_traj % batch_count:
        raise violation("must be >= 1 and divide n_traj", "ensemble", "batch_count")
    if e.get("seed", 0) < 0:
        raise violation("must be >= 0", "ensemble", "seed")
    ensemble = EnsembleConfig(n_traj=n_traj, master_seed=e.get("seed", 20240601), batch_count=batch_count)

    o = values["output"]
    mix = o.get("mix")
    if mix is not None and not 0 <= mix <= 1:
        raise violation("must lie in [0, 1]", "output", "mix")

    mech = None
    m = values["mech"]
    if m:
        for key in ("k_c", "g_c", "kappa_c", "drive_freq"):
            if key not in m:
                raise ConstraintViolation("required key missing", key=f"mech.{key}")
        for key in ("k_c", "g_c", "kappa_c", "jump_rate", "discard"):
            if m.get(key, 0.0) < 0:
                raise violation("must be >= 0", "mech", key)
        for key in ("t_max", "dt"):
            if key in m and not m[key] > 0:
                raise violation("must be > 0", "mech", key)
        if m.get("seed", 0) < 0:
            raise violation("must be >= 0", "mech", "seed")
        mp = MechParams(
            m["k_c"], m["g_c"], m["kappa_c"], m["drive_freq"], m.get("jump_rate", 0.0), m.get("amplitude", 1.0)
        )
        run = {k: m[k] for k in ("t_max", "dt", "discard", "seed") if k in m}
        mech = MechRun(params=mp, **run)
        if mech.discard >= mech.t_max:
            raise violation("must be shorter than mech.t_max", "mech", "discard")

    return RunConfig(
        params=params,
        backend=backend,
        grid=grid,
        ensemble=ensemble,
        output_dir=o.get("dir"),
        stem=o.get("stem", "spectrum"),
        emit_svg=o.get("svg", False),
        mix=mix,
        workers=workers,
        mech=mech,
    )


def load_config(path, require_system: bool = True) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), require_system=require_system)
