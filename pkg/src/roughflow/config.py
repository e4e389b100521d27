"""Problem and experiment configurations: JSON schemas, dataclasses and builders."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import brownian
from .path_lift import PiecewisePath, RoughPathGrid, lyons_extend_level3, pure_area, signature
from .rde.fields import VectorFieldSet

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_FIELD = {"type": "array", "items": {"type": "string"}, "minItems": 1}

DRIVER_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "kind": {"const": "csv"},
                "path": {"type": "string"},
                "level": {"enum": [1, 2, 3]},
            },
            "required": ["kind", "path"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "pure_area"}, "steps": {"type": "integer", "minimum": 1}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "brownian"},
                "depth": {"type": "integer", "minimum": 0, "maximum": 18},
                "seed": {"type": "integer", "minimum": 0},
                "lift": {"enum": ["stratonovich", "ito"]},
                "extra_depth": {"type": "integer", "minimum": 0, "maximum": 8},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "linear"},
                "velocity": _VEC,
                "steps": {"type": "integer", "minimum": 1},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

_PROBLEM_PROPS = {
    "dim": {"type": "integer", "minimum": 1},
    "driver_dim": {"type": "integer", "minimum": 1},
    "fields": {"type": "array", "items": _FIELD, "minItems": 1},
    "drift": _FIELD,
    "p": {"type": "number", "exclusiveMinimum": 1.0, "exclusiveMaximum": 4.0},
    "driver": DRIVER_SCHEMA,
    "t0": _NUM,
    "t1": _NUM,
    "x0": _VEC,
    "tol": {"type": "number", "exclusiveMinimum": 0},
    "max_depth": {"type": "integer", "minimum": 0, "maximum": 24},
    "ode_substeps": {"type": "integer", "minimum": 1},
    "output_steps": {"type": "integer", "minimum": 1},
}

PROBLEM_SCHEMA = {
    "type": "object",
    "properties": _PROBLEM_PROPS,
    "required": ["dim", "driver_dim", "fields", "p", "driver", "x0"],
    "additionalProperties": False,
}

CONVERGENCE_SCHEMA = {
    "type": "object",
    "properties": {
        **_PROBLEM_PROPS,
        "depths": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 22}, "minItems": 2},
        "generator": {"enum": ["log_ode", "euler"]},
    },
    "required": ["dim", "driver_dim", "fields", "p", "driver", "x0", "depths"],
    "additionalProperties": False,
}

WONG_ZAKAI_SCHEMA = {
    "type": "object",
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "driver_dim": {"type": "integer", "minimum": 1},
        "fields": {"type": "array", "items": _FIELD, "minItems": 1},
        "drift": _FIELD,
        "x0": _VEC,
        "depths": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 16}, "minItems": 2},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "p": {"type": "number", "exclusiveMinimum": 2.0, "exclusiveMaximum": 3.0},
        "extra_depth": {"type": "integer", "minimum": 0, "maximum": 8},
    },
    "required": ["dim", "driver_dim", "fields", "x0", "depths"],
    "additionalProperties": False,
}

LEVY_SCHEMA = {
    "type": "object",
    "properties": {
        "samples": {"type": "integer", "minimum": 2},
        "depth": {"type": "integer", "minimum": 1, "maximum": 14},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

SAMPLE_SCHEMA = {
    "type": "object",
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "depth": {"type": "integer", "minimum": 0, "maximum": 20},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}


class SchemaError(ValueError):
    """The configuration does not match its schema."""


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def validate(obj: dict, schema: dict):
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {e.message}") from None


@dataclass
class ProblemConfig:
    dim: int
    driver_dim: int
    fields: list
    p: float
    driver: dict
    x0: list
    drift: list | None = None
    t0: float | None = None
    t1: float | None = None
    tol: float = 1e-9
    max_depth: int = 14
    ode_substeps: int = 8
    output_steps: int | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, obj: dict, base_dir=None, schema=PROBLEM_SCHEMA) -> "ProblemConfig":
        validate(obj, schema)
        keys = {k: v for k, v in obj.items() if k in _PROBLEM_PROPS}
        cfg = cls(**keys)
        cfg.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        if len(cfg.x0) != cfg.dim:
            raise SchemaError(f"x0: expected {cfg.dim} entries, got {len(cfg.x0)}")
        if len(cfg.fields) != cfg.driver_dim:
            raise SchemaError(f"fields: expected {cfg.driver_dim} fields, got {len(cfg.fields)}")
        return cfg

    def vector_fields(self) -> VectorFieldSet:
        return VectorFieldSet.from_text(self.dim, self.fields, self.drift)

    def build_driver(self, seed: int | None = None, depth: int | None = None) -> RoughPathGrid:
        return build_driver(self.driver, self.driver_dim, self.p, self.base_dir, seed=seed, depth=depth)


def build_driver(desc: dict, driver_dim: int, p: float, base_dir=".", seed=None, depth=None) -> RoughPathGrid:
    kind = desc["kind"]
    levels = min(3, int(np.floor(p)))
    if kind == "csv":
        path = Path(desc["path"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        with open(path) as fh:
            pp = PiecewisePath.from_csv(fh)
        level = int(desc.get("level", max(levels, 2) if levels >= 2 else 1))
        X = signature(pp, N=min(level, 3), p=p)
    elif kind == "pure_area":
        if driver_dim != 2:
            raise ValueError("the pure-area driver is two-dimensional")
        X = pure_area(1.0, int(desc.get("steps", 64)), p)
    elif kind == "brownian":
        n = int(depth if depth is not None else desc.get("depth", 10))
        s = brownian.sample(driver_dim, n, 1.0, int(seed if seed is not None else desc.get("seed", 0)))
        X = brownian.stratonovich_lift(s, int(desc.get("extra_depth", 6)), p)
        if desc.get("lift", "stratonovich") == "ito":
            X = brownian.ito_lift(X)
    elif kind == "linear":
        v = np.asarray(desc.get("velocity", [1.0] * driver_dim), dtype=float)
        steps = int(desc.get("steps", 16))
        X = signature(PiecewisePath(np.linspace(0, 1, steps + 1), np.linspace(0, 1, steps + 1)[:, None] * v[None, :]),
                      N=max(2, levels), p=p)
    else:
        raise ValueError(f"unknown driver kind {kind!r}")
    if X.dim != driver_dim:
        raise ValueError(f"driver has dimension {X.dim}, problem declares {driver_dim}")
    if levels == 3 and X.level_cap < 3:
        X = lyons_extend_level3(X)
    return X


@dataclass
class WongZakaiConfig:
    dim: int
    driver_dim: int
    fields: list
    x0: list
    depths: list
    drift: list | None = None
    seeds: list = field(default_factory=lambda: [0])
    T: float = 1.0
    p: float = 2.5
    extra_depth: int = 6

    @classmethod
    def from_dict(cls, obj: dict) -> "WongZakaiConfig":
        validate(obj, WONG_ZAKAI_SCHEMA)
        return cls(**obj)


@dataclass
class LevyStatsConfig:
    samples: int = 100_000
    depth: int = 10
    T: float = 1.0
    seed: int = 0

    @classmethod
    def from_dict(cls, obj: dict) -> "LevyStatsConfig":
        validate(obj, LEVY_SCHEMA)
        return cls(**obj)


@dataclass
class SampleConfig:
    dim: int = 1
    depth: int = 10
    T: float = 1.0
    seed: int = 0

    @classmethod
    def from_dict(cls, obj: dict) -> "SampleConfig":
        validate(obj, SAMPLE_SCHEMA)
        return cls(**obj)
