"""Run configuration: defaults, strict schema validation and ``--set`` overrides."""

import copy
import json

import jsonschema

from heisrect.errors import UsageError
from heisrect.surfaces import SURFACE_KINDS

FORMATS = ("csv", "json")
ORACLE_KINDS = ("auto", "flag", "plane")

DEFAULTS = {
    "group": {"n": 1},
    "surface": {"params": {}},
    "oracle": {"kind": "auto"},
    "scales": {"n0": "auto", "nmax": "auto", "depth": 8, "verify": [2, 3, 4, 5, 6, 7, 8]},
    "cantor": {"alpha": "auto", "tau": "auto", "center": None, "kept": 256},
    "sampling": {"count": 200, "seed": 0, "pairs": 1000},
    "tolerances": {"nearest_point": 1e-6},
    "ode": {"step": 1e-3},
    "probe": {"base": None, "y": 0.0, "range": [1e-4, 1e-1], "points": 16, "window": 0.5,
              "directions": 8, "two_regime": False},
    "thresholds": {"factor": 1.1, "slope_slack": 0.05, "flag_exponent_slack": 0.01,
                   "plane_exponent_slack": 0.1},
    "output": {"path": "heisrect-out.csv", "format": "csv"},
}

_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_VECTOR = {"type": "array", "items": {"type": "number"}}


def _section(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _section({
    "group": _section({"n": _POS_INT}),
    "surface": _section({"kind": {"enum": list(SURFACE_KINDS)}, "params": {"type": "object"}},
                        required=("kind",)),
    "oracle": _section({"kind": {"enum": list(ORACLE_KINDS)}}),
    "scales": _section({
        "n0": {"anyOf": [{"const": "auto"}, _NONNEG_INT]},
        "nmax": {"anyOf": [{"const": "auto"}, _POS_INT]},
        "depth": _POS_INT,
        "verify": {"type": "array", "items": _NONNEG_INT, "minItems": 1},
    }),
    "cantor": _section({
        "alpha": {"anyOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0, "maximum": 1}]},
        "tau": {"anyOf": [{"const": "auto"}, _NONNEG]},
        "center": {"anyOf": [{"type": "null"}, _VECTOR]},
        "kept": {"type": "integer", "minimum": 2},
    }),
    "sampling": _section({"count": {"type": "integer", "minimum": 10}, "seed": _NONNEG_INT,
                          "pairs": _POS_INT}),
    "tolerances": _section({"nearest_point": _POS}),
    "ode": _section({"step": _POS}),
    "probe": _section({
        "base": {"anyOf": [{"type": "null"}, _VECTOR]},
        "y": {"type": "number"},
        "range": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
        "points": {"type": "integer", "minimum": 2},
        "window": _POS,
        "directions": _POS_INT,
        "two_regime": {"type": "boolean"},
    }),
    "thresholds": _section({"factor": _POS, "slope_slack": _NONNEG, "flag_exponent_slack": _NONNEG,
                            "plane_exponent_slack": _NONNEG}),
    "output": _section({"path": {"type": "string", "minLength": 1}, "format": {"enum": list(FORMATS)}}),
}, required=("surface",))


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "params":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_override(item):
    """``a.b.c=value`` -> (["a", "b", "c"], value); the value is JSON when it parses as JSON."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects key=value, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(raw, overrides):
    raw = copy.deepcopy(raw)
    for item in overrides:
        path, value = parse_override(item)
        node = raw
        for part in path[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise UsageError(f"--set {item!r}: {part!r} is not a section")
            node = nxt
        node[path[-1]] = value
    return raw


def validate(raw):
    """Validate a raw mapping and return it merged with the defaults."""
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise UsageError("invalid config:\n  " + "\n  ".join(lines))
    cfg = _merge(DEFAULTS, raw)
    n = cfg["group"]["n"]
    for sec, key in (("cantor", "center"), ("probe", "base")):
        vec = cfg[sec][key]
        if vec is not None and len(vec) != 2 * n:
            raise UsageError(f"{sec}.{key} must have {2 * n} coordinates for n = {n}")
    lo, hi = cfg["probe"]["range"]
    if not lo < hi:
        raise UsageError("probe.range must be increasing")
    if cfg["scales"]["nmax"] != "auto" and cfg["scales"]["n0"] != "auto" \
            and cfg["scales"]["nmax"] <= cfg["scales"]["n0"]:
        raise UsageError("scales.nmax must exceed scales.n0")
    return cfg


def load_config(path, overrides=()):
    """Read a JSON config file, apply ``--set`` overrides, validate, fill defaults."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    return validate(apply_overrides(raw, overrides))
