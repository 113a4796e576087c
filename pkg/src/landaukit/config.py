"""Run configuration: an INI-style file plus ``section.key=value`` overrides.

Every recognised key is declared once in :data:`KEYS`; parsing, validation,
``--help`` text and the resolved ``config.json`` are all derived from it.
"""
from __future__ import annotations

import configparser
import json
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from .grid import VelocityGrid
from .integrator import MODELS, SCHEMES, SchemeConfig, config_hash

__all__ = ["Key", "KEYS", "ConfigError", "RunConfig", "load_config", "describe_keys"]

DATA_KINDS = ("maxwellian", "bimodal", "rough-fourier", "rough-maxwellian", "rough-translate", "exp-tail",
              "checkpoint")


class ConfigError(ValueError):
    """Unknown key, unparsable value or violated precondition."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        val = text.strip()
        if val not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return val
    return parse


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


def _specs(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(";") if p.strip())


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    parse: Callable[[str], Any]
    default: str
    help: str


KEYS: tuple[Key, ...] = (
    Key("run", "model", _choice(MODELS), "landau", "right-hand side: " + " | ".join(MODELS)),
    Key("run", "seed", int, "0", "seed for all randomness"),
    Key("grid", "dim", int, "3", "velocity dimension (1 or 3)"),
    Key("grid", "n", int, "32", "points per axis (even, factors 2 and 3 only)"),
    Key("grid", "L", float, "8.0", "box half-width"),
    Key("scheme", "scheme", _choice(SCHEMES), "rk4", "time integrator: " + " | ".join(SCHEMES)),
    Key("scheme", "dt", _opt_float, "auto", "fixed step, or auto for the stability limit"),
    Key("scheme", "dt_max", _opt_float, "auto", "cap on the automatic step"),
    Key("scheme", "cfl_safety", float, "0.4", "safety factor in (0, 1]"),
    Key("scheme", "t_end", float, "1.0", "final time"),
    Key("scheme", "record_every", int, "1", "steps between recorded rows"),
    Key("scheme", "positivity_clip", _bool, "false", "clip negatives and renormalise mass"),
    Key("scheme", "blowup_factor", float, "1000", "stop once max|f| exceeds this multiple of its start"),
    Key("data", "kind", _choice(DATA_KINDS), "bimodal", "initial data: " + " | ".join(DATA_KINDS)),
    Key("data", "rho", float, "1.0", "maxwellian mass"),
    Key("data", "T", float, "1.0", "maxwellian / bimodal temperature"),
    Key("data", "shift", float, "1.0", "bimodal half-separation along v_1"),
    Key("data", "r", float, "0.0", "rough-fourier regularity index; rough-maxwellian is mu (1 + 0.9 tanh(X / std X))"),
    Key("data", "delta", float, "0.02", "rough-fourier extra decay"),
    Key("data", "amplitude", float, "1.0", "rough-fourier L2 norm"),
    Key("data", "J", int, "2", "rough-translate: number of translates minus one"),
    Key("data", "l", float, "0.0", "rough-translate weight power"),
    Key("data", "eps", float, "0.5", "rough-translate Besov exponent"),
    Key("data", "alpha", float, "0.45", "rough-translate bump singularity |x|^-alpha"),
    Key("data", "radius", float, "1.0", "rough-translate bump radius"),
    Key("data", "b", float, "2.0", "exp-tail decay rate"),
    Key("data", "beta", float, "1.0", "exp-tail exponent"),
    Key("data", "weight", float, "0.3", "exp-tail mass fraction"),
    Key("data", "path", str, "", "checkpoint: path to an .ldnf field"),
    Key("diagnostics", "norms", _specs, "", "norm specs evaluated on the final field, ';'-separated m=..,s=..,l=.."),
    Key("rates", "orders", _floats, "1", "Sobolev orders n to fit"),
    Key("rates", "l", float, "0.0", "base weight l; the fitted norm uses l - 3n/2 + 3r/2"),
    Key("rates", "window", _floats, "0.02,0.3", "fit window t0,t1"),
    Key("rates", "samples", int, "12", "sample times in the window"),
    Key("rates", "tolerance", float, "0.3", "slope tolerance"),
    Key("rates", "reference", _choice(("none", "maxwellian")), "none",
        "fit the norm of f - mu_f instead of f"),
    Key("moments", "a", float, "0.2", "exponential-moment rate"),
    Key("moments", "beta", float, "1.0", "exponential-moment exponent"),
    Key("output", "dir", str, "out", "output directory"),
)

_INDEX = {(k.section, k.name): k for k in KEYS}


def describe_keys() -> str:
    """One line per key, grouped by section, for ``--help``."""
    lines, last = [], None
    for k in KEYS:
        if k.section != last:
            lines.append(f"[{k.section}]")
            last = k.section
        lines.append(f"  {k.name + ' = ' + k.default:<26} {k.help}")
    return "\n".join(lines)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration as ``{section: {key: value}}``."""

    values: dict

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def to_dict(self) -> dict:
        """Everything except ``[output]``, which says where results go, not what they are."""
        return {s: {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}
                for s, d in self.values.items() if s != "output"}

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def scheme_config(self, **override) -> SchemeConfig:
        s = dict(self["scheme"])
        s.update(override)
        return SchemeConfig(**s)

    def write_json(self, directory, extra: dict | None = None) -> Path:
        payload = {
            "config": self.to_dict(),
            "hash": self.hash,
            "versions": versions(),
        }
        if extra:
            payload.update(extra)
        path = Path(directory) / "config.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def versions() -> dict:
    from . import __version__

    return {"landaukit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _validate(values: dict) -> None:
    try:
        VelocityGrid(**values["grid"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    try:
        SchemeConfig(**values["scheme"])
    except ValueError as exc:
        raise ConfigError(f"scheme: {exc}") from None
    d = values["data"]
    if d["kind"] == "checkpoint" and not d["path"]:
        raise ConfigError("data.path is required for kind=checkpoint")
    if d["kind"] in ("maxwellian", "bimodal") and not d["T"] > 0:
        raise ConfigError("data.T must be positive")
    w = values["rates"]["window"]
    if len(w) != 2 or not 0 < w[0] < w[1]:
        raise ConfigError("rates.window must be t0,t1 with 0 < t0 < t1")
    if values["rates"]["samples"] < 8:
        raise ConfigError("rates.samples must be at least 8")
    if not values["moments"]["a"] > 0:
        raise ConfigError("moments.a must be positive")


def load_config(path=None, overrides=()) -> RunConfig:
    """Read ``path`` (optional), apply ``section.key=value`` overrides, validate.

    Raises
    ------
    ConfigError
        On unknown sections or keys, unparsable values or failed validation.
    """
    raw = {k.section: {} for k in KEYS}
    for k in KEYS:
        raw[k.section][k.name] = k.default
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        for section in parser.sections():
            for name, val in parser.items(section):
                _set(raw, section, name, val)
    for item in overrides:
        dotted, sep, val = item.partition("=")
        section, dot, name = dotted.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        _set(raw, section, name, val)
    values: dict = {}
    for k in KEYS:
        try:
            parsed = k.parse(raw[k.section][k.name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{k.section}.{k.name}: {exc}") from None
        values.setdefault(k.section, {})[k.name] = parsed
    _validate(values)
    return RunConfig(values)


def _set(raw: dict, section: str, name: str, val: str) -> None:
    if (section, name) not in _INDEX:
        raise ConfigError(f"unknown config key {section}.{name}")
    raw[section][name] = val.strip()
