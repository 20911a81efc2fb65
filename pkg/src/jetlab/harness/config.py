"""Experiment configuration: JSON schema, validation and hashing."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from ..polyjet.expression import ExpressionError, VectorField

MODES = ("decompose", "adjust", "transverse", "parametric", "primitive", "top_order", "reduce",
         "sweep")
CONSTRUCTIONS = ("transverse", "adjust", "wiggle")
BOUND_KINDS = ("h_mixed", "dF", "phi", "b", "conclusion_c0", "conclusion_perp", "adjust")
MAX_DIM = 4
MAX_ORDER = 6
# sampling rule shared by every mode (see localmodels for the meaning of each count)
DEFAULT_GRID = {"per_delta": 8, "per_eps": 16, "other": 17, "per_axis": 41, "norm_grid": 21}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_field = {"description": "expression tree (single node or list of components)",
          "anyOf": [{"type": "object"}, {"type": "array", "minItems": 1}, {"type": "number"}]}
_coeff = {
    "type": "object",
    "required": ["alpha", "field"],
    "additionalProperties": False,
    "properties": {
        "alpha": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "field": _field,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "jetlab experiment",
    "type": "object",
    "required": ["mode", "m", "r"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "m": {"type": "integer", "minimum": 1, "maximum": MAX_DIM},
        "n": {"type": "integer", "minimum": 1, "maximum": MAX_DIM},
        "r": {"type": "integer", "minimum": 1, "maximum": MAX_ORDER},
        "k": {"type": "integer", "minimum": 0},
        "q": {"type": "integer", "minimum": 0, "maximum": 2},
        "eps": _pos,
        "delta": _pos,
        "theta": {"type": "number", "minimum": 0},
        "lam": _pos,
        "field": _field,
        "conormal": {"type": "array", "items": _num, "minItems": 1},
        "sigma": {"type": "object", "required": ["coeffs"], "additionalProperties": False,
                  "properties": {"coeffs": {"type": "array", "items": _coeff}}},
        "z_values": {"type": "array", "items": {"type": "array", "items": _num}},
        "construction": {"enum": list(CONSTRUCTIONS)},
        "kinds": {"type": "array", "items": {"enum": list(BOUND_KINDS)}, "minItems": 1,
                  "uniqueItems": True},
        "lattice": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "eps": {"type": "array", "items": _pos, "minItems": 1},
                "ratio": {"type": "array", "items": _pos, "minItems": 1},
                "delta": {"type": "array", "items": _pos, "minItems": 1},
                "theta": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "diagonal": {"type": "object", "required": ["eps", "ratio", "steps"],
                             "properties": {"eps": _pos, "ratio": _pos,
                                            "steps": {"type": "integer", "minimum": 0}}},
            },
        },
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {k: {"type": "integer", "minimum": 2}
                           for k in ("per_delta", "per_eps", "other", "per_axis", "norm_grid")},
        },
        "refine": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "exact": {"type": "boolean"},
        "outputs": {"type": "object", "additionalProperties": False,
                    "properties": {"dir": {"type": "string"}}},
    },
}

_NEEDS = {
    "decompose": ("sigma",),
    "adjust": ("field", "conormal", "delta"),
    "transverse": ("field", "eps", "delta"),
    "parametric": ("field", "q", "eps", "delta", "z_values"),
    "primitive": ("field", "conormal", "eps", "delta"),
    "top_order": ("sigma",),
    "reduce": ("sigma",),
    "sweep": ("construction", "lattice"),
}


class ConfigError(ValueError):
    """Schema or consistency violation, with a JSON path to the offending entry."""


@dataclass
class ExperimentConfig:
    raw: dict
    source: str | None = None
    field_: VectorField | None = field(default=None, repr=False)

    @property
    def mode(self) -> str:
        return self.raw["mode"]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def canonical(self) -> str:
        return canonical_json(self.raw)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


def _err_path(error) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path)


def validate(raw: dict) -> dict:
    """Schema check, then the cross-field constraints the schema cannot say."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_err_path(e)}: {e.message}")
    mode, m, r = raw["mode"], raw["m"], raw["r"]
    for key in _NEEDS[mode]:
        if key not in raw:
            raise ConfigError(f"$: mode {mode!r} needs {key!r}")
    k = raw.get("k", 0 if mode == "reduce" else 1)
    if not 0 <= k < m:
        raise ConfigError(f"$.k: need 0 <= k < m, got k={k}, m={m}")
    if mode in ("transverse", "parametric") and m < 2:
        raise ConfigError("$.m: the transverse model needs m >= 2")
    if "conormal" in raw and len(raw["conormal"]) != m:
        raise ConfigError(f"$.conormal: expected {m} entries, got {len(raw['conormal'])}")
    if "z_values" in raw:
        q = raw.get("q", 0)
        for i, z in enumerate(raw["z_values"]):
            if len(z) != q:
                raise ConfigError(f"$.z_values[{i}]: expected {q} entries")
    if "sigma" in raw:
        for i, c in enumerate(raw["sigma"]["coeffs"]):
            a = c["alpha"]
            if any(j > m for j in a):
                raise ConfigError(f"$.sigma.coeffs[{i}].alpha: index out of range for m={m}")
            top = mode in ("decompose", "top_order")
            if (top and len(a) != r) or len(a) > r:
                raise ConfigError(f"$.sigma.coeffs[{i}].alpha: order {len(a)} not allowed "
                                  f"for r={r} in mode {mode!r}")
    if raw.get("exact") and mode != "decompose":
        raise ConfigError(f"$.exact: exact arithmetic is only available for 'decompose'")
    if mode == "sweep":
        lat = raw["lattice"]
        if "diagonal" not in lat and not ("eps" in lat or "delta" in lat):
            raise ConfigError("$.lattice: give 'diagonal' or lists of eps/delta")
    return raw


def parse_fields(raw: dict):
    """Parse every expression in the config, reporting node paths on failure."""
    m = raw["m"] + (raw.get("q", 0) if raw["mode"] == "parametric" else 0)
    try:
        f = VectorField.from_json(raw["field"], m) if "field" in raw else None
        coeffs = {}
        for i, c in enumerate(raw.get("sigma", {}).get("coeffs", [])):
            key = tuple(sorted(j - 1 for j in c["alpha"]))
            vf = VectorField.from_json(c["field"], raw["m"])
            coeffs[key] = vf
    except ExpressionError as exc:
        raise ConfigError(f"expression: {exc}") from None
    return f, coeffs


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    return make_config(raw, overrides, str(p))


def make_config(raw: dict, overrides: dict | None = None, source: str | None = None):
    raw = copy.deepcopy(raw)
    if not isinstance(raw, dict):
        raise ConfigError("$: config must be a JSON object")
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    validate(raw)
    f, _ = parse_fields(raw)
    return ExperimentConfig(raw, source, f)


def scale_grid(raw: dict, factor: float) -> dict:
    """Multiply every per-axis sample count by ``factor`` (at least 2 each)."""
    grid = dict(DEFAULT_GRID)
    grid.update(raw.get("grid", {}))
    out = {k: max(2, int(round(v * factor))) for k, v in grid.items()}
    for k in ("other", "per_axis", "norm_grid"):
        if out[k] % 2 == 0:
            out[k] += 1  # keep the centre sample
    return out
