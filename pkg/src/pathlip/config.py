"""Run configuration: sectioned key-value files with a typed schema.

Example::

    [run]
    seed = 3
    [benchmark]
    name = B2
    [verify]
    theorems = uniform-lipschitz, lk-internal

Overrides use ``section.key=value``. Every error names the offending key
path.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Any, Callable

from .hamiltonian import BENCHMARKS

THEOREMS = ("uniform-lipschitz", "special-lipschitz", "time-lipschitz",
            "infinitesimal-criterion", "lk-internal")


class ConfigError(ValueError):
    pass


def _float_list(s: str) -> list:
    return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]


def _str_list(s: str) -> list:
    return [v.strip() for v in s.replace(";", ",").split(",") if v.strip()]


def _optional_float(s: str):
    return None if s.strip().lower() in ("", "none") else float(s)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


SCHEMA: dict = {
    "run": {
        "seed": Key(int, "0", _nonneg, ">= 0"),
        "out": Key(str, "pathlip-out"),
        "threads": Key(int, "1", _pos, ">= 1"),
    },
    "horizon": {
        "n": Key(int, "1", _pos, ">= 1"),
        "T": Key(float, "1.0", _pos, "> 0"),
        "h": Key(float, "0.5", _nonneg, ">= 0"),
        "grid_step": Key(float, "0.01", _pos, "> 0"),
    },
    "benchmark": {
        "name": Key(str, "B1", lambda v: v in BENCHMARKS, "one of " + ", ".join(BENCHMARKS)),
        "q": Key(float, "0.1", _nonneg, ">= 0"),
    },
    "lk": {
        "variant": Key(str, "uniform", lambda v: v in ("uniform", "special"), "uniform or special"),
        "source": Key(str, "empirical", lambda v: v in ("empirical", "declared"), "empirical or declared"),
        "safety_factor": Key(float, "1.25", lambda v: v >= 1, ">= 1"),
        "floor": Key(float, "1e-3", _pos, "> 0"),
        "epsilon": Key(float, "1e-6", _pos, "> 0"),
        "lambda_H": Key(_optional_float, "none", lambda v: v is None or v > 0, "> 0"),
        "lambda_sigma": Key(_optional_float, "none", lambda v: v is None or v > 0, "> 0"),
        "hull_paths": Key(int, "20", _pos, ">= 1"),
    },
    "solver": {
        "control_intervals": Key(int, "4", _pos, ">= 1"),
        "integrator_substeps": Key(int, "1", _pos, ">= 1"),
        "enumeration_cap": Key(int, "1000000", _pos, ">= 1"),
        "method": Key(str, "auto", lambda v: v in ("auto", "exhaustive", "refined"),
                      "auto, exhaustive or refined"),
        "budget": Key(int, "4", _nonneg, ">= 0"),
        "n_random": Key(int, "16", _pos, ">= 1"),
    },
    "verify": {
        "theorems": Key(_str_list, "uniform-lipschitz",
                        lambda v: all(x in THEOREMS for x in v), "subset of " + ", ".join(THEOREMS)),
        "paths": Key(int, "20", lambda v: v >= 2, ">= 2"),
        "lambda_x": Key(_float_list, "1.0", lambda v: len(v) > 0 and all(x > 0 for x in v),
                        "positive numbers"),
        "pairs": Key(int, "40", _nonneg, ">= 0"),
        "bump_pairs": Key(int, "40", _nonneg, ">= 0"),
        "times": Key(_float_list, "0.0, 0.25, 0.5", lambda v: len(v) > 0, "nonempty list"),
        "time_paths": Key(int, "10", _pos, ">= 1"),
        "time_pairs": Key(int, "20", _pos, ">= 1"),
        "criterion_points": Key(int, "4", _pos, ">= 1"),
        "criterion_s": Key(_float_list, "-2, -1, 0, 1, 2", lambda v: len(v) > 0, "nonempty list"),
        "tolerance": Key(float, "1e-9", _nonneg, ">= 0"),
        "criterion_tolerance": Key(float, "1e-2", _nonneg, ">= 0"),
    },
    "solve": {
        "paths": Key(int, "5", _pos, ">= 1"),
        "lambda_x": Key(float, "1.0", _pos, "> 0"),
        "times": Key(_float_list, "0.0, 0.5", lambda v: len(v) > 0, "nonempty list"),
    },
    "characteristics": {
        "triples": Key(int, "20", _pos, ">= 1"),
        "t": Key(float, "0.0", _nonneg, ">= 0"),
        "policy_intervals": Key(int, "8", _pos, ">= 1"),
        "band": Key(str, "center", lambda v: v in ("center", "upper", "lower"), "center, upper or lower"),
        # mu increments are O(step^2), except O(step) at steps where y1 - y2
        # passes through zero; tolerance = this many grid steps
        "tolerance_steps": Key(float, "1.0", _nonneg, ">= 0"),
        "export": Key(int, "3", _nonneg, ">= 0"),
    },
}


class RunConfig:
    """Validated configuration values, addressed as ``cfg["section"]["key"]``."""

    def __init__(self, values: dict, raw: dict):
        self._values = values
        self.raw = raw

    def __getitem__(self, section: str) -> dict:
        return self._values[section]

    def to_ini(self) -> str:
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key in SCHEMA[sec]:
                lines.append(f"{key} = {self.raw[sec][key]}")
            lines.append("")
        return "\n".join(lines)


def _read_raw(path=None, text: str | None = None) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (T vs t)
    try:
        if path is not None:
            with open(path) as fh:
                cp.read_file(fh)
        elif text is not None:
            cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config: {e}") from None
    raw = {sec: {k: v.default for k, v in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{sec}: unknown section")
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}: unknown key")
            raw[sec][key] = val
    return raw


def apply_override(raw: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    path, val = item.split("=", 1)
    if "." not in path:
        raise ConfigError(f"override key {path!r} is not of the form section.key")
    sec, key = path.strip().split(".", 1)
    if sec not in SCHEMA:
        raise ConfigError(f"{sec}: unknown section")
    if key not in SCHEMA[sec]:
        raise ConfigError(f"{sec}.{key}: unknown key")
    raw[sec][key] = val.strip()


def load_config(path=None, overrides=(), text: str | None = None) -> RunConfig:
    raw = _read_raw(path, text)
    for item in overrides:
        apply_override(raw, item)
    values = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, spec in keys.items():
            s = raw[sec][key]
            try:
                v = spec.parse(s)
            except (TypeError, ValueError):
                raise ConfigError(f"{sec}.{key}: cannot read {s!r} as {spec.parse.__name__.strip('_')}") from None
            if spec.check is not None and not spec.check(v):
                raise ConfigError(f"{sec}.{key}: value {s!r} must be {spec.rule}")
            values[sec][key] = v
    return RunConfig(values, raw)
