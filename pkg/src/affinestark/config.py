"""Experiment configuration: defaults, JSON schema, and line-anchored validation."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import ConfigurationError

DEFAULT_CONFIG = {
    "potential": {
        "block": {"kind": "compact_bump", "c": 1.0, "d": 2.0, "h": -30.0},
        "lambda": 1.2,
        "b": 1.0,
        "n_range": None,
    },
    "mass": 0.5,
    "grid": {
        "x_min": -20.0,
        "x_max": 60.0,
        "relative_to_fixed_point": True,
        "n_points": 40000,
        "coarse_points": 20000,
        "resolution_cells": 8.0,
    },
    "spectrum": {
        "e_min": -3000.0,
        "e_max": -0.5,
        "edge_fraction": 0.05,
        "edge_tol": 1e-6,
        "wavefunction_stride": 10,
    },
    "plot": {"x_min": -20.0, "x_max": 60.0, "n_points": 4001},
    "ladders": {"tol": 0.02, "residual_max": 5e-3, "ratio_tol": 1e-3},
    "scaling_check": {"ladder": 1, "rungs": [1, 6, 10], "max_deviation": 2e-2},
    "basis": {
        "generator": "lowdin_gaussian",
        "width": 0.3,
        "n_sites": 41,
        "lambda": 2.718281828459045,
        "b": 0.0,
        "n_values": [-2, -1, 0, 1, 2],
        "quad_tol": 1e-10,
        "sinc_radius_cells": 5000.0,
        "tabulate_points": 2001,
    },
    "tightbinding": {
        "width": 0.3,
        "n_sites": 41,
        "n_window": [-3, 3],
        "quad_tol": 1e-9,
        "s_max": 3,
        "truncation": 101,
        "ladder_tol": 1e-3,
        "compare_fd": True,
    },
    "bessel": {
        "epsilon": 1.0,
        "Delta": 1.5,
        "lambda": 1.2,
        "truncation": 121,
        "eigenvector_rungs": [-2, -1, 0, 1, 2],
        "braiding": {"s": 0.4, "g": 0.7, "truncation": 181},
        "jacobi_anger": {"Delta": 2.0, "n_theta": 256},
    },
    "bloch": {
        "n_kappa": 201,
        "cell_points": 128,
        "n_bands": 3,
        "wannier_n_kappa": 256,
        "wannier_band": 0,
    },
    "analyses": {
        "potential": True,
        "solve": True,
        "ladders": True,
        "scaling_check": True,
        "basis": True,
        "tightbinding": True,
        "bessel": True,
        "bloch": True,
    },
    "output": "results",
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}
_posint = {"type": "integer", "minimum": 1}
_bool = {"type": "boolean"}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


BLOCK_SCHEMA = {
    "oneOf": [
        _obj({"kind": {"const": "compact_bump"}, "c": _num, "d": _num, "h": _num}, ["kind"]),
        _obj({"kind": {"const": "cosine"}, "omega": _num, "amplitude": _num}, ["kind"]),
        _obj({"kind": {"const": "custom_table"},
              "xs": {"type": "array", "items": _num, "minItems": 2},
              "ys": {"type": "array", "items": _num, "minItems": 2}}, ["kind", "xs", "ys"]),
    ]
}

CONFIG_SCHEMA = _obj({
    "potential": _obj({
        "block": BLOCK_SCHEMA,
        "lambda": _pos,
        "b": _num,
        "n_range": {"oneOf": [{"type": "null"},
                              {"type": "array", "items": _int, "minItems": 2, "maxItems": 2}]},
    }),
    "mass": _pos,
    "grid": _obj({"x_min": _num, "x_max": _num, "relative_to_fixed_point": _bool,
                  "n_points": {"type": "integer", "minimum": 3},
                  "coarse_points": {"type": "integer", "minimum": 3},
                  "resolution_cells": _pos}),
    "spectrum": _obj({"e_min": _num, "e_max": _num, "edge_fraction": _pos, "edge_tol": _pos,
                      "wavefunction_stride": _posint}),
    "plot": _obj({"x_min": _num, "x_max": _num, "n_points": {"type": "integer", "minimum": 2}}),
    "ladders": _obj({"tol": _pos, "residual_max": _pos, "ratio_tol": _pos}),
    "scaling_check": _obj({"ladder": _posint,
                           "rungs": {"type": "array", "items": _int, "minItems": 2},
                           "max_deviation": _pos}),
    "basis": _obj({"generator": {"enum": ["sinc", "lowdin_gaussian"]}, "width": _pos,
                   "n_sites": {"type": "integer", "minimum": 3}, "lambda": _pos, "b": _num,
                   "n_values": {"type": "array", "items": _int, "minItems": 1},
                   "quad_tol": _pos, "sinc_radius_cells": _pos,
                   "tabulate_points": {"type": "integer", "minimum": 2}}),
    "tightbinding": _obj({"width": _pos, "n_sites": {"type": "integer", "minimum": 3},
                          "n_window": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
                          "quad_tol": _pos, "s_max": {"type": "integer", "minimum": 0},
                          "truncation": {"type": "integer", "minimum": 3}, "ladder_tol": _pos,
                          "compare_fd": _bool}),
    "bessel": _obj({"epsilon": _num, "Delta": _num, "lambda": _pos,
                    "truncation": {"type": "integer", "minimum": 3},
                    "eigenvector_rungs": {"type": "array", "items": _int},
                    "braiding": _obj({"s": _num, "g": _num, "truncation": {"type": "integer", "minimum": 3}}),
                    "jacobi_anger": _obj({"Delta": _num, "n_theta": _posint})}),
    "bloch": _obj({"n_kappa": {"type": "integer", "minimum": 2},
                   "cell_points": {"type": "integer", "minimum": 64},
                   "n_bands": _posint, "wannier_n_kappa": {"type": "integer", "minimum": 2},
                   "wannier_band": {"type": "integer", "minimum": 0}}),
    "analyses": _obj({k: _bool for k in DEFAULT_CONFIG["analyses"]}),
    "output": {"type": "string", "minLength": 1},
})


@dataclass
class ExperimentConfig:
    data: dict
    source: str | None = None

    def __getitem__(self, key):
        return self.data[key]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "block":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _locate(text: str, path) -> int | None:
    """Line number (1-based) of the deepest key of ``path`` found in ``text``."""
    pos = 0
    line = None
    for part in path:
        if not isinstance(part, str):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def _describe(err: jsonschema.ValidationError, text: str) -> str:
    path = list(err.absolute_path)
    where = "/".join(str(p) for p in path) or "<root>"
    msg = err.message
    if err.validator == "additionalProperties":
        # point at the offending key itself
        extra = re.findall(r"'([^']+)'", err.message)
        line = _locate(text, path + extra[:1]) if extra else _locate(text, path)
    else:
        line = _locate(text, path)
    if line is None:
        line = 1
    return f"line {line}: {where}: {msg}"


def validate_config(raw: dict, text: str | None = None) -> None:
    """Schema validation; raises ConfigurationError naming the line of the first problem."""
    text = text if text is not None else json.dumps(raw, indent=2)
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        raise ConfigurationError("; ".join(_describe(e, text) for e in errors[:5]))


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults merged with the JSON file at ``path`` (validated before merging)."""
    data = copy.deepcopy(DEFAULT_CONFIG)
    source = None
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
        validate_config(raw, text)
        data = _merge(data, raw)
        source = str(path)
    if overrides:
        validate_config(overrides)
        data = _merge(data, overrides)
    validate_config(data)
    return ExperimentConfig(data, source)
