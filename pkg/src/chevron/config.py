"""Flat ``key = value`` configuration files with ``[section]`` headers.

Every key is listed in :data:`SCHEMA` with its type and default; unknown
sections or keys are errors. Command-line overrides use
``section.key=value`` and go through the same parser.
"""

from __future__ import annotations

import configparser
import copy
import math
from pathlib import Path
from typing import Dict, Iterable, Optional

from .errors import ConfigError
from .model import (
    Grid1D,
    InitialSpec,
    NoControl,
    OutputSpec,
    Parameters1D,
    Parameters2D,
    RunConfig,
    SolverSpec,
    Tracking,
    ZeroStabilization,
)

__all__ = [
    "SCHEMA",
    "defaults",
    "load_settings",
    "apply_overrides",
    "build_run_config",
    "initial_spec",
    "reference_initial",
    "build_params2d",
    "describe_keys",
]


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none"):
            return None
        return conv(text)

    parse.__name__ = f"optional {conv.__name__}"
    return parse


def _int(text):
    value = float(text) if isinstance(text, str) and ("e" in text.lower() or "." in text) else text
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"not an integer: {text!r}")
        return int(value)
    return int(value)


def _str(text):
    return str(text).strip()


_int.__name__ = "int"
_str.__name__ = "str"
_bool.__name__ = "bool"

# section -> key -> (parser, default, help)
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "params": {
        "tau": (float, 1.0, "relaxation time of the amplitude equation"),
        "d1": (float, 1.0, "director diffusion coefficient"),
        "h": (float, 0.1, "director damping"),
        "length": (float, 100.0, "domain length L"),
    },
    "grid": {
        "n": (_int, 512, "number of intervals"),
        "dt": (float, 0.1, "time step"),
    },
    "run": {
        "steps": (_int, 5000, "number of time steps"),
        "stop_below": (float, 0.0, "stabilize: stop once both raw norms fall below this (0 = run all steps)"),
    },
    "initial": {
        "kind": (_str, "oscillatory", "oscillatory | gaussian | zero | from_file"),
        "seed": (_int, 0, "seed of the oscillatory initial condition"),
        "amplitude": (float, 0.25, "amplitude of the initial condition"),
        "center": (_opt(float), None, "gaussian center (default L/2)"),
        "width": (_opt(float), None, "gaussian width (default L/10)"),
        "path": (_opt(_str), None, "snapshot file for from_file"),
    },
    "control": {
        "kind": (_str, "none", "none | zero_stabilization | tracking"),
        "auto": (_bool, True, "derive gains and mode counts automatically"),
        "mu": (float, 1.0, "zero stabilization gain"),
        "k_modes": (_int, 1, "zero stabilization mode count"),
        "epsilon": (float, 1e-6, "margin of the full-damping criterion"),
        "mu1": (float, 1.0, "tracking gain on the amplitude"),
        "mu2": (float, 1.0, "tracking gain on the director angle"),
        "n1": (_int, 1, "tracking modes on the amplitude"),
        "n2": (_int, 1, "tracking modes on the director angle"),
    },
    "solver": {
        "kind": (_str, "direct", "direct | cg"),
        "tol": (float, 1e-10, "CG relative residual tolerance"),
        "max_iter": (_opt(_int), None, "CG iteration cap (default 2 * interior size)"),
    },
    "output": {
        "directory": (_opt(_str), None, "output directory"),
        "snapshot_stride": (_int, 0, "write a snapshot every this many steps (0 = initial and final only)"),
        "diagnostics_stride": (_int, 1, "write a diagnostics row every this many steps"),
    },
    "reference": {
        "kind": (_str, "oscillatory", "reference initial condition kind"),
        "seed": (_int, 0, "reference seed"),
        "amplitude": (float, 0.25, "reference amplitude"),
        "center": (_opt(float), None, "reference gaussian center"),
        "width": (_opt(float), None, "reference gaussian width"),
        "path": (_opt(_str), None, "reference snapshot file"),
        "spinup": (_int, 0, "free steps applied to the reference before tracking starts"),
        "m0_steps": (_int, 500, "reference steps used to estimate the gradient bound M0"),
    },
    "params2d": {
        "tau": (float, 1.0, "relaxation time"),
        "d1": (float, 1.0, "diffusion D1"),
        "d2": (float, 1.0, "diffusion D2"),
        "h": (float, 0.1, "damping"),
        "c1": (float, 0.0, "coupling c1"),
        "c2": (float, 0.0, "coupling c2"),
        "beta": (float, 0.0, "coupling beta"),
        "lx": (float, math.pi, "rectangle side in x"),
        "ly": (float, math.pi, "rectangle side in y"),
        "max_index": (_int, 64, "largest mode index enumerated per direction"),
    },
}


def defaults() -> Dict[str, Dict[str, object]]:
    return {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}


def _parse_value(section, key, text, origin):
    if section not in SCHEMA:
        raise ConfigError(f"{origin}: unknown section [{section}]")
    if key not in SCHEMA[section]:
        known = ", ".join(SCHEMA[section])
        raise ConfigError(f"{origin}: unknown key {section}.{key} (known: {known})")
    conv = SCHEMA[section][key][0]
    try:
        return conv(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: bad value for {section}.{key}: {exc}") from None


def load_settings(path: Optional[Path] = None) -> Dict[str, Dict[str, object]]:
    """Defaults updated from the file at ``path`` (if given)."""
    settings = defaults()
    if path is None:
        return settings
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        for key, text in parser.items(section):
            settings.setdefault(section, {})[key] = _parse_value(section, key, text, str(path))
    return settings


def apply_overrides(settings, overrides: Iterable[str]):
    """Return a copy of ``settings`` with ``section.key=value`` overrides applied."""
    out = copy.deepcopy(settings)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, text = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        out[section][key] = _parse_value(section, key, text.strip(), "--set")
    return out


def initial_spec(section) -> InitialSpec:
    return InitialSpec(
        kind=section["kind"],
        seed=section["seed"],
        amplitude=section["amplitude"],
        center=section["center"],
        width=section["width"],
        path=section["path"],
    )


def build_run_config(settings) -> RunConfig:
    """Validated :class:`RunConfig` from resolved settings."""
    p = settings["params"]
    params = Parameters1D(tau=p["tau"], d1=p["d1"], h=p["h"], length=p["length"])
    grid = Grid1D.from_length(params.length, settings["grid"]["n"], settings["grid"]["dt"])
    c = settings["control"]
    if c["kind"] == "none":
        control = NoControl()
    elif c["kind"] == "zero_stabilization":
        control = ZeroStabilization(mu=c["mu"], k_modes=c["k_modes"], auto=c["auto"], epsilon=c["epsilon"])
    elif c["kind"] == "tracking":
        control = Tracking(mu1=c["mu1"], mu2=c["mu2"], n1=c["n1"], n2=c["n2"], auto=c["auto"])
    else:
        raise ConfigError(f"unknown control kind {c['kind']!r}")
    s = settings["solver"]
    o = settings["output"]
    return RunConfig(
        params=params,
        grid=grid,
        steps=settings["run"]["steps"],
        initial=initial_spec(settings["initial"]),
        control=control,
        solver=SolverSpec(kind=s["kind"], tol=s["tol"], max_iter=s["max_iter"]),
        output=OutputSpec(o["directory"], o["snapshot_stride"], o["diagnostics_stride"]),
        stop_below=settings["run"]["stop_below"],
    )


def reference_initial(settings) -> InitialSpec:
    return initial_spec(settings["reference"])


def build_params2d(settings) -> Parameters2D:
    q = settings["params2d"]
    return Parameters2D(**{k: v for k, v in q.items() if k != "max_index"})


def describe_keys() -> str:
    """All sections and keys with defaults, for ``--help``."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (conv, default, text) in keys.items():
            lines.append(f"  {key} = {default!r:<14} {text}")
    return "\n".join(lines)
