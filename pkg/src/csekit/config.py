"""Run configuration: JSON schema, parsing and per-command checks."""

import copy
import json

import jsonschema

from .designs import design_from_config
from .grid import NullHypothesis, build_platten
from .model import family_from_config

__all__ = ["CONFIG_SCHEMA", "ConfigError", "load_config", "RunConfig"]

_NUM_ARRAY = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "csekit run configuration",
    "type": "object",
    "required": ["family", "master_seed"],
    "additionalProperties": False,
    "properties": {
        "family": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": ["normal", "bernoulli_arms", "glm"]},
                "dim": {"type": "integer", "minimum": 1},
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "covariates": {"type": "array", "items": _NUM_ARRAY, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "design": {
            "type": "object",
            "required": ["name"],
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "required": ["lower", "upper", "counts"],
            "properties": {
                "lower": _NUM_ARRAY,
                "upper": _NUM_ARRAY,
                "counts": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "hypotheses": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["axis", "threshold"],
                "properties": {
                    "axis": {"type": "integer", "minimum": 0},
                    "threshold": {"type": "number"},
                    "direction": {"enum": ["<=", ">="]},
                },
                "additionalProperties": False,
            },
        },
        "sim_count": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "minimum": 0, "maximum": 1},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 18446744073709551615},
        "lower": {"type": "boolean"},
        "adaptive": {
            "type": "object",
            "properties": {
                "rounds": {"type": "integer", "minimum": 0},
                "budget": {"type": "integer", "minimum": 0},
                "sim_growth": {"type": "number", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "bootstrap": {
            "type": "object",
            "required": ["B"],
            "properties": {"B": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "bound": {
            "type": "object",
            "required": ["theta0"],
            "properties": {
                "theta0": {"type": "number"},
                "a": {"type": "number", "minimum": 0, "maximum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "v_max": {"type": "number", "exclusiveMinimum": 0},
                "v_count": {"type": "integer", "minimum": 2},
                "fixed_q": {"type": "array", "items": {"type": "number", "minimum": 1}},
            },
            "additionalProperties": False,
        },
        "estimand": {
            "type": "object",
            "required": ["coef"],
            "properties": {"coef": _NUM_ARRAY, "offset": {"type": "number"}},
            "additionalProperties": False,
        },
    },
}

_COMMAND_NEEDS = {
    "validate": ("design", "grid", "sim_count", "delta"),
    "calibrate": ("design", "grid", "sim_count", "alpha"),
    "grid": ("grid",),
    "bound": ("bound",),
    "confset": ("design",),
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is a JSON pointer to the offending value."""

    def __init__(self, path, message):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path or "/"


def _pointer(parts):
    return "".join(f"/{p}" for p in parts)


class RunConfig:
    """A validated configuration plus the objects it describes."""

    def __init__(self, raw, command):
        self.raw = raw
        self.command = command
        self.master_seed = int(raw["master_seed"])
        try:
            self.family = family_from_config(raw["family"])
        except (KeyError, ValueError) as exc:
            raise ConfigError("/family", str(exc)) from None
        self.design = None
        if "design" in raw:
            try:
                self.design = design_from_config(raw["design"])
                self.design.check_family(self.family)
            except KeyError as exc:
                raise ConfigError("/design/name", str(exc.args[0])) from None
            except (TypeError, ValueError) as exc:
                raise ConfigError("/design", str(exc)) from None
        self.hypotheses = tuple(NullHypothesis(**h) for h in raw.get("hypotheses", []))
        for j, h in enumerate(self.hypotheses):
            if h.axis >= self.family.dim:
                raise ConfigError(f"/hypotheses/{j}/axis", "axis exceeds the family dimension")
        adaptive = raw.get("adaptive", {})
        self.adaptive_rounds = int(adaptive.get("rounds", 0))
        self.adaptive_budget = int(adaptive.get("budget", 0))
        self.sim_growth = float(adaptive.get("sim_growth", 1.0))

    def platten(self):
        g = self.raw["grid"]
        dim = self.family.dim
        for key in ("lower", "upper", "counts"):
            if len(g[key]) != dim:
                raise ConfigError(f"/grid/{key}", f"expected {dim} entries")
        if any(hi <= lo for lo, hi in zip(g["lower"], g["upper"])):
            raise ConfigError("/grid", "upper must exceed lower on every axis")
        return build_platten(
            g["lower"], g["upper"], g["counts"], self.hypotheses, self.raw.get("sim_count", 1)
        )

    def resolved(self):
        """Config as recorded in provenance blocks."""
        out = copy.deepcopy(self.raw)
        out["adaptive"] = {
            "rounds": self.adaptive_rounds,
            "budget": self.adaptive_budget,
            "sim_growth": self.sim_growth,
        }
        return out


def load_config(path, command, seed=None, adaptive_rounds=None):
    """Parse, schema-check and command-check a config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigError("/", f"cannot read config: {exc}") from None
    if isinstance(raw, dict):
        if seed is not None:
            raw["master_seed"] = int(seed)
        if adaptive_rounds is not None:
            raw.setdefault("adaptive", {})["rounds"] = int(adaptive_rounds)
    errors = sorted(
        jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw), key=lambda e: list(e.path)
    )
    if errors:
        err = errors[0]
        raise ConfigError(_pointer(err.absolute_path), err.message)
    for key in _COMMAND_NEEDS.get(command, ()):
        if key not in raw:
            raise ConfigError(f"/{key}", f"required by the {command!r} command")
    if command in ("validate", "calibrate") and "alpha" in raw and "delta" in raw:
        other = "alpha" if command == "validate" else "delta"
        raise ConfigError(f"/{other}", "give exactly one of alpha (calibrate) or delta (validate)")
    return RunConfig(raw, command)
