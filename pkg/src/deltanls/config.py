"""Experiment configuration: JSON schema, validation with dotted field paths, data builders."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .grid import WaveField, load_field, make_grid, wavefield

__all__ = ["SCHEMA", "ConfigError", "load_config", "validate_config", "config_hash", "build_initial",
           "DEFAULTS"]

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}
_method = {"enum": ["exact-kernel", "crank-nicolson", "spectral"]}

SCHEMA = {
    "type": "object",
    "required": ["grid", "physics"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "grid": {
            "type": "object", "required": ["n", "half_width"], "additionalProperties": False,
            "properties": {"n": {"type": "integer", "minimum": 16}, "half_width": _pos},
        },
        "physics": {
            "type": "object", "required": ["q", "alpha"], "additionalProperties": False,
            "properties": {"q": {"type": "number", "minimum": 0}, "alpha": _pos},
        },
        "initial": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["gaussian", "two-bump", "file"]},
                "amplitude": _num, "width": _pos, "center": _num, "phase": _num,
                "separation": _pos, "path": {"type": "string"},
            },
        },
        "run": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "t_final": _num, "dt": _pos, "stride": _int_pos, "method": _method,
                "sub_steps": _int_pos, "mass_tol": _pos, "boundary_tol": _pos,
            },
        },
        "decay": {
            "type": "object", "additionalProperties": False,
            "properties": {"t_grid": {"type": "array", "items": _pos, "minItems": 2},
                           "method": _method, "boundary_tol": _pos},
        },
        "virial": {
            "type": "object", "additionalProperties": False,
            "properties": {"weight": {"enum": ["pure-quadratic", "quadratic-cutoff"]}, "R": _pos,
                           "spacings": {"type": "array", "items": _pos, "minItems": 2},
                           "grids": {"type": "array", "items": {"type": "integer", "minimum": 16}}},
        },
        "scatter": {
            "type": "object", "additionalProperties": False,
            "properties": {"tolerance": _pos, "t_list": {"type": "array", "items": _pos}},
        },
        "profiles": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n_list": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "terms": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "required": ["amplitude", "width"], "additionalProperties": False,
                        "properties": {"amplitude": _num, "width": _pos, "phase": _num,
                                       "x_rate": _num, "t_rate": _num, "t_power": _num},
                    },
                },
                "remainder": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"kind": {"enum": ["zero", "noise"]}, "h1": _pos, "cutoff": _pos},
                },
                "p_list": {"type": "array", "items": _pos},
                "extract": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"time_window": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                                   "max_profiles": _int_pos, "stop_threshold": _pos,
                                   "average_last": _int_pos, "estimator": {"enum": ["median", "mean"]}},
                },
            },
        },
        "xval": {
            "type": "object", "additionalProperties": False,
            "properties": {"sub_steps": {"type": "array", "items": _int_pos, "minItems": 2}, "t": _pos},
        },
        "report": {
            "type": "object", "additionalProperties": False,
            "properties": {"criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 16}},
                           "records": {"type": "array", "items": {"type": "string"}}},
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "initial": {"kind": "gaussian", "amplitude": 1.0, "width": 1.0, "center": 0.0, "phase": 0.0},
    "run": {"t_final": 1.0, "dt": 0.01, "stride": 10, "method": "spectral", "sub_steps": 1024,
            "mass_tol": 1e-6, "boundary_tol": 1e-3},
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
    elif err.validator == "additionalProperties":
        extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
        if extra:
            parts.append(extra[0])
    return ".".join(parts)


def _check_finite(obj, path=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}" if path else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}.{i}")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError(path, "value must be finite")


def validate_config(cfg: dict) -> dict:
    """Validate and fill defaults; raises ConfigError naming the offending field."""
    _check_finite(cfg)
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(cfg),
                    key=lambda e: (len(list(e.absolute_path)), _path(e)))
    if errors:
        e = errors[0]
        raise ConfigError(_path(e), e.message)
    n = cfg["grid"]["n"]
    if n & (n - 1):
        raise ConfigError("grid.n", "must be a power of two")
    out = copy.deepcopy(cfg)
    for key, block in DEFAULTS.items():
        if isinstance(block, dict):
            merged = dict(block)
            merged.update(out.get(key, {}))
            out[key] = merged
        else:
            out.setdefault(key, block)
    return out


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("", "top level must be an object")
    return validate_config(cfg)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def build_initial(cfg: dict, base: Path | None = None) -> WaveField:
    """Initial field; ``phase`` is the wavenumber k of an e^{ikx} factor."""
    g = make_grid(cfg["grid"]["n"], cfg["grid"]["half_width"])
    ini = cfg["initial"]
    kind = ini["kind"]
    if kind == "file":
        if "path" not in ini:
            raise ConfigError("initial.path", "required for kind 'file'")
        p = Path(ini["path"])
        if base is not None and not p.is_absolute():
            p = base / p
        f = load_field(p)
        if f.grid != g:
            raise ConfigError("initial.path", "field grid differs from the configured grid")
        return f
    a, w, c, k = ini.get("amplitude", 1.0), ini.get("width", 1.0), ini.get("center", 0.0), ini.get("phase", 0.0)

    def bump(x0):
        return a * np.exp(-((g.x - x0) ** 2) / (2 * w**2))

    if kind == "gaussian":
        v = bump(c)
    else:
        s = ini.get("separation", 10.0)
        v = bump(c - s / 2) + bump(c + s / 2)
    return wavefield(g, v * np.exp(1j * k * g.x))
