"""Experiment configuration and JSON encoding of complex data.

Complex numbers are written as ``{"re": x, "im": y}`` and matrices as
row-major nested lists of such records.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .algebra import make_algebra, random_group_element
from .invariants import InvariantId
from .laxspace import LaxConfig, LaxElement
from .moper import FlowTriple, MOperator

__all__ = [
    "CONFIG_SCHEMA",
    "DEFAULT_CONFIG",
    "ConfigError",
    "FlowSpec",
    "Experiment",
    "load_config",
    "parse_config",
    "encode_complex",
    "decode_complex",
    "encode_matrix",
    "decode_matrix",
    "state_to_json",
    "state_from_json",
    "moperator_to_json",
]

_COMPLEX = {
    "type": "object",
    "properties": {"re": {"type": "number"}, "im": {"type": "number"}},
    "required": ["re", "im"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "algebra": {
            "type": "object",
            "properties": {
                "family": {"enum": ["A", "B", "C", "D"]},
                "n": {"type": "integer", "minimum": 1, "maximum": 6},
            },
            "required": ["family", "n"],
            "additionalProperties": False,
        },
        "punctures": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"z": _COMPLEX, "m": {"type": "integer", "minimum": 0}},
                "required": ["z", "m"],
                "additionalProperties": False,
            },
        },
        "tyurin": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "z": _COMPLEX,
                    "h": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                    "conjugator_seed": {"type": "integer", "minimum": 0},
                    "conjugator_scale": {"type": "number", "minimum": 0},
                },
                "required": ["z", "h"],
                "additionalProperties": False,
            },
        },
        "flows": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "invariant": {
                        "type": "object",
                        "properties": {
                            "kind": {"enum": ["trace_power", "char_coeff", "det", "pfaffian"]},
                            "index": {"type": "integer", "minimum": 0},
                        },
                        "required": ["kind"],
                        "additionalProperties": False,
                    },
                    "puncture": {"type": "integer", "minimum": 0},
                    "m": {"type": "integer"},
                    "t_end": {"type": "number"},
                    "dt": {"type": "number", "exclusiveMinimum": 0},
                    "tol": {"type": ["number", "null"], "exclusiveMinimum": 0},
                },
                "required": ["invariant", "puncture", "m"],
                "additionalProperties": False,
            },
        },
        "commute": {
            "type": "object",
            "properties": {
                "t": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                       "minItems": 2},
            },
            "additionalProperties": False,
        },
        "element_scale": {"type": "number", "exclusiveMinimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
    "required": ["algebra", "punctures"],
    "additionalProperties": False,
}

DEFAULT_CONFIG = {
    "algebra": {"family": "C", "n": 2},
    "punctures": [{"z": {"re": 0.0, "im": 0.0}, "m": 1}],
    "tyurin": [{"z": {"re": 1.0, "im": 1.0}, "h": [1, 0], "conjugator_seed": 7,
                "conjugator_scale": 0.3}],
    "flows": [
        {"invariant": {"kind": "char_coeff", "index": 1}, "puncture": 0, "m": 0,
         "t_end": 0.5, "dt": 0.0125, "tol": None},
        {"invariant": {"kind": "char_coeff", "index": 2}, "puncture": 0, "m": 0,
         "t_end": 0.5, "dt": 0.0125, "tol": None},
    ],
    "commute": {"t": 0.2, "dt": [0.04, 0.02, 0.01]},
    "element_scale": 0.5,
    "samples": 16,
    "seed": 0,
    "output_dir": "out",
}

_DEFAULTS = {"tyurin": [], "flows": [], "commute": {"t": 0.2, "dt": [0.04, 0.02, 0.01]},
             "element_scale": 1.0, "samples": 16, "seed": 0, "output_dir": "out"}


class ConfigError(ValueError):
    """Schema or cross-reference violation; ``path`` locates the field."""

    def __init__(self, msg, path=""):
        super().__init__(f"{path or '<root>'}: {msg}")
        self.path = path


@dataclass(frozen=True)
class FlowSpec:
    triple: FlowTriple
    t_end: float = 0.5
    dt: float = 0.0125
    tol: float | None = None


@dataclass(frozen=True, eq=False)
class Experiment:
    raw: dict
    config: LaxConfig
    flows: tuple
    commute_t: float
    commute_dt: tuple
    element_scale: float
    samples: int
    seed: int
    output_dir: str


def _path(err) -> str:
    return "/".join(str(p) for p in err.absolute_path)


def load_config(path=None) -> dict:
    """Read a JSON config (the default config when ``path`` is None)."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def parse_config(raw: dict, seed: int | None = None) -> Experiment:
    """Validate ``raw`` and build the Lax configuration and flow triples."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message, _path(exc)) from exc
    raw = {**copy.deepcopy(_DEFAULTS), **copy.deepcopy(raw)}
    if seed is not None:
        raw["seed"] = int(seed)
    alg_raw = raw["algebra"]
    try:
        alg = make_algebra(alg_raw["family"], alg_raw["n"])
    except ValueError as exc:
        raise ConfigError(str(exc), "algebra") from exc
    punct = [(decode_complex(p["z"]), p["m"]) for p in raw["punctures"]]
    tyurin = []
    for i, t in enumerate(raw["tyurin"]):
        g_seed = t.get("conjugator_seed")
        if g_seed is None:
            g = np.eye(alg.d)
        else:
            g = random_group_element(alg, np.random.default_rng(g_seed), t.get("conjugator_scale", 0.3))
        tyurin.append((decode_complex(t["z"]), t["h"], g))
    try:
        cfg = LaxConfig.build(alg, punct, tyurin)
    except ValueError as exc:
        raise ConfigError(str(exc), "tyurin" if tyurin else "punctures") from exc
    flows = []
    for i, f in enumerate(raw["flows"]):
        inv = f["invariant"]
        chi = InvariantId(inv["kind"], inv.get("index", 0))
        triple = FlowTriple(chi, f["puncture"], f["m"])
        try:
            triple.validate(cfg)
        except ValueError as exc:
            raise ConfigError(str(exc), f"flows/{i}") from exc
        flows.append(FlowSpec(triple, f.get("t_end", 0.5), f.get("dt", 0.0125), f.get("tol")))
    com = {**_DEFAULTS["commute"], **raw["commute"]}
    return Experiment(raw, cfg, tuple(flows), float(com["t"]), tuple(com["dt"]),
                      float(raw["element_scale"]), int(raw["samples"]), int(raw["seed"]),
                      raw["output_dir"])


# ---------------------------------------------------------------- encoding


def encode_complex(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def decode_complex(rec) -> complex:
    return complex(rec["re"], rec["im"])


def encode_matrix(X) -> list:
    X = np.asarray(X)
    if X.ndim == 0:
        return encode_complex(X)
    return [encode_matrix(row) for row in X]


def decode_matrix(data) -> np.ndarray:
    if isinstance(data, dict):
        return np.array(decode_complex(data))
    return np.array([decode_matrix(row) for row in data])


def state_to_json(state) -> dict:
    """Snapshot of a :class:`~laxbcd.flow.FlowState`."""
    cfg = state.config
    return {
        "t": state.t,
        "algebra": {"family": cfg.alg.family, "n": cfg.alg.n},
        "punctures": [{"z": encode_complex(p.z), "m": p.m} for p in cfg.punctures],
        "tyurin": [{"z": encode_complex(t.z), "h": t.h.diag.tolist(), "g": encode_matrix(t.g)}
                   for t in cfg.tyurin],
        "blocks": encode_matrix(state.L.blocks),
    }


def state_from_json(data):
    from .flow import FlowState

    alg = make_algebra(data["algebra"]["family"], data["algebra"]["n"])
    punct = [(decode_complex(p["z"]), p["m"]) for p in data["punctures"]]
    tyurin = [(decode_complex(t["z"]), t["h"], decode_matrix(t["g"])) for t in data["tyurin"]]
    cfg = LaxConfig.build(alg, punct, tyurin)
    return FlowState(LaxElement(cfg, decode_matrix(data["blocks"]).astype(complex)), float(data["t"]))


def moperator_to_json(M: MOperator) -> dict:
    a = M.triple
    return {
        "triple": {"invariant": {"kind": a.chi.kind, "index": a.chi.index},
                   "puncture": a.puncture, "m": a.m},
        "principal_part": encode_matrix(M.principal_part),
        "tyurin": [{"nu": encode_complex(M.nu[i]), "D": encode_matrix(M.tyurin_part(i)),
                    "M0": encode_matrix(M.M0[i])} for i in range(len(M.nu))],
        "C0": encode_matrix(M.C0),
        "solve_residual": M.solve_residual,
        "rank_deficiency": M.rank_deficiency,
    }
