"""Experiment configuration: YAML schema, validation and object builders.

A config is one structured document naming the domain, operator, measure,
grid, weight, levels, seeds and tolerances.  Validation reports the path of
the offending field.  Builders turn the validated dict into toolkit objects.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from .errors import ConfigError
from .geometry import Domain
from .kernels import OperatorSpec
from .measures import Density, MeasureData
from .reconstruct import CutoffEta, constant_eta

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "domain": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["interval", "ball", "rectangle"]},
                "a": {"type": "number"},
                "b": {"type": "number"},
                "center": {"type": "array", "items": {"type": "number"}},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "dim": {"type": "integer", "minimum": 1, "maximum": 3},
                "bounds": {"type": "array",
                           "items": {"type": "array", "items": {"type": "number"},
                                     "minItems": 2, "maxItems": 2}},
            },
            "required": ["kind"],
        },
        "operator": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["laplacian", "fractional", "divergence"]},
                "alpha": {"type": "number", "exclusiveMinimum": 0,
                          "exclusiveMaximum": 2},
                "coeff_preset": {"enum": ["identity", "smooth"]},
                "lam": {"type": "number", "exclusiveMinimum": 0},
                "Lam": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind"],
        },
        "measure": {
            "type": "object",
            "properties": {
                "atoms": {"type": "array",
                          "items": {"type": "array", "minItems": 2, "maxItems": 2}},
                "density": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": ["constant", "gaussian"]},
                        "value": {"type": "number"},
                        "sigma": {"type": "number", "exclusiveMinimum": 0},
                        "center": {"type": "array", "items": {"type": "number"}},
                    },
                    "required": ["kind"],
                },
            },
        },
        "grid": {
            "type": "object",
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "h_list": {"type": "array",
                           "items": {"type": "number", "exclusiveMinimum": 0}},
                "node_cap": {"type": "integer", "minimum": 1},
            },
        },
        "rho": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["uniform", "constant"]},
                "value": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind"],
        },
        "eta": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "smoothstep"]},
                "value": {"type": "number"},
                "center": {"type": "array", "items": {"type": "number"}},
                "r_one": {"type": "number", "exclusiveMinimum": 0},
                "r_zero": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind"],
        },
        "levels": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "family": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "k": {"type": "number", "exclusiveMinimum": 0},
        "n": {"type": "number", "exclusiveMinimum": 0},
        "start": {"type": "array", "items": {"type": "number"}},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "eval_points": {"type": "array",
                        "items": {"type": "array", "items": {"type": "number"}}},
        "tolerances": {
            "type": "object",
            "properties": {
                "reduite": {"type": "number", "exclusiveMinimum": 0},
                "quad_rel": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "properties": {"prefix": {"type": "string"}},
        },
    },
    "required": ["domain", "operator"],
    "additionalProperties": False,
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


def validate_config(cfg: dict) -> dict:
    errors = sorted(_VALIDATOR.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field '{path}': {e.message}")
    return cfg


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must contain a mapping at the top level")
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _coeff_presets():
    return {
        "identity": (lambda pts: np.ones(np.atleast_2d(pts).shape[0]), 1.0, 1.0),
        "smooth": (lambda pts: 1.0 + 0.5 * np.sin(
            math.pi * np.atleast_2d(pts)[:, 0]), 0.5, 1.5),
    }


def build_domain(cfg: dict) -> Domain:
    d = cfg["domain"]
    if d["kind"] == "interval":
        if "a" not in d or "b" not in d:
            raise ConfigError("config field 'domain': interval needs 'a' and 'b'")
        return Domain.interval(d["a"], d["b"])
    if d["kind"] == "ball":
        for key in ("center", "radius", "dim"):
            if key not in d:
                raise ConfigError(f"config field 'domain.{key}': required for balls")
        return Domain.ball(d["center"], d["radius"], d["dim"])
    if "bounds" not in d:
        raise ConfigError("config field 'domain.bounds': required for rectangles")
    return Domain.rectangle(d["bounds"])


def build_operator(cfg: dict) -> OperatorSpec:
    o = cfg["operator"]
    if o["kind"] == "laplacian":
        return OperatorSpec.laplacian()
    if o["kind"] == "fractional":
        if "alpha" not in o:
            raise ConfigError("config field 'operator.alpha': required for fractional")
        return OperatorSpec.fractional(o["alpha"])
    preset = o.get("coeff_preset", "identity")
    fn, lam, Lam = _coeff_presets()[preset]
    return OperatorSpec.divergence(fn, o.get("lam", lam), o.get("Lam", Lam))


def build_measure(cfg: dict, dom: Domain) -> MeasureData:
    m = cfg.get("measure", {})
    atoms = []
    for point, weight in m.get("atoms", []):
        pt = point if isinstance(point, (list, tuple)) else [point]
        atoms.append((pt, weight))
    density = None
    if "density" in m:
        dd = m["density"]
        if dd["kind"] == "constant":
            density = Density.constant(dd.get("value", 1.0))
        else:
            center = dd.get("center", list(dom.anchor))
            density = Density.gaussian(dd.get("value", 1.0),
                                       dd.get("sigma", 0.25), center)
    return MeasureData.make(atoms=atoms, density=density, dom=dom)


def build_rho(cfg: dict, dom: Domain) -> Callable:
    r = cfg.get("rho", {"kind": "uniform"})
    if r["kind"] == "uniform":
        level = 1.0 / dom.volume()
    else:
        level = float(r["value"])
    return lambda pts: np.full(np.atleast_2d(pts).shape[0], level)


def build_eta(cfg: dict, dom: Domain) -> Callable:
    e = cfg.get("eta", {"kind": "constant"})
    if e["kind"] == "constant":
        return constant_eta(e.get("value", 1.0))
    center = e.get("center", list(dom.anchor))
    return CutoffEta(center=tuple(center), r_one=e["r_one"], r_zero=e["r_zero"])


def grid_widths(cfg: dict) -> list:
    g = cfg.get("grid", {})
    if "h_list" in g:
        return [float(h) for h in g["h_list"]]
    if "h" in g:
        return [float(g["h"])]
    return []
