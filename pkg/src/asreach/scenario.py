"""Scenario files: JSON schema, parsing with JSON-pointer errors, and serialization.

Numbers that reach the exact decision procedure are written as rational
strings (``"15/2"``, ``"-3"``, ``"0.25"``); JSON integers are accepted too.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from .control import Ball, ControllerConfig
from .errors import AsReachError, ScenarioError
from .geometry import ConvexPolytope, SafetySet
from .model import (FiniteDiscrete, PointMass, Smms, UniformBall, UniformBox)
from .plan import PlannerConfig
from .sim import Scenario

SCHEMA_VERSION = 1

_RAT = {"oneOf": [{"type": "integer"},
                  {"type": "string", "pattern": r"^\s*[-+]?\d+(\.\d+)?(\s*/\s*[-+]?\d+)?\s*$"}]}
_VEC = {"type": "array", "items": _RAT, "minItems": 1}
_NUM = {"anyOf": [{"type": "number"}, _RAT]}

SCHEMA = {
    "type": "object",
    "required": ["dimension", "modes"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "modes": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["type"],
                "oneOf": [
                    {"properties": {"type": {"const": "point_mass"}, "v": _VEC},
                     "required": ["type", "v"]},
                    {"properties": {"type": {"const": "uniform_box"}, "center": _VEC,
                                    "half_widths": _VEC},
                     "required": ["type", "center", "half_widths"]},
                    {"properties": {"type": {"const": "uniform_ball"}, "center": _VEC,
                                    "radius": _RAT},
                     "required": ["type", "center", "radius"]},
                    {"properties": {"type": {"const": "finite_discrete"},
                                    "atoms": {"type": "array", "minItems": 1, "items": {
                                        "type": "object", "required": ["v", "p"],
                                        "properties": {"v": _VEC, "p": _RAT}}}},
                     "required": ["type", "atoms"]},
                ],
            },
        },
        "safety": {
            "type": "array", "minItems": 1,
            "items": {"type": "object", "required": ["rows"], "properties": {
                "rows": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "required": ["a", "b"],
                    "properties": {"a": _VEC, "b": _RAT}}}}},
        },
        "ball": {"type": "object", "required": ["center", "radius"],
                 "properties": {"center": _VEC, "radius": _RAT}},
        "start": _VEC,
        "target": _VEC,
        "eps": _RAT,
        "controller": {"type": "object", "additionalProperties": False, "properties": {
            "max_steps": {"type": "integer", "minimum": 1},
            "delta_safety_factor": _NUM,
            "delta_override": _NUM,
            "lambda_method": {"enum": ["auto", "exact", "sampled"]}}},
        "path": {"type": "array", "minItems": 1, "items": {"type": "array", "items": _NUM}},
        "planner": {"type": "object", "additionalProperties": False, "properties": {
            "max_samples": {"type": "integer", "minimum": 1},
            "goal_bias": {"type": "number", "minimum": 0, "maximum": 1},
            "step_fraction": {"type": "number", "exclusiveMinimum": 0},
            "connect_radius": {"type": "number", "exclusiveMinimum": 0},
            "min_clearance": {"type": "number", "minimum": 0},
            "shortcut": {"type": "boolean"},
            "bounds": {"type": "array", "minItems": 2, "maxItems": 2,
                       "items": {"type": "array", "items": {"type": "number"}}},
            "seed": {"type": "integer"}}},
    },
}


def _pointer(parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _rat(x, ptr: str) -> Fraction:
    try:
        return Fraction(x.strip()) if isinstance(x, str) else Fraction(x)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ScenarioError(f"invalid rational {x!r}", ptr) from None


def _vec(xs, ptr: str, n: int | None = None) -> tuple:
    if n is not None and len(xs) != n:
        raise ScenarioError(f"expected {n} components, got {len(xs)}", ptr)
    return tuple(_rat(x, f"{ptr}/{i}") for i, x in enumerate(xs))


def _mode(obj: dict, ptr: str, n: int):
    kind = obj["type"]
    try:
        if kind == "point_mass":
            return PointMass(_vec(obj["v"], ptr + "/v", n))
        if kind == "uniform_box":
            return UniformBox(_vec(obj["center"], ptr + "/center", n),
                              _vec(obj["half_widths"], ptr + "/half_widths", n))
        if kind == "uniform_ball":
            return UniformBall(_vec(obj["center"], ptr + "/center", n), _rat(obj["radius"], ptr + "/radius"))
        atoms = tuple((_vec(a["v"], f"{ptr}/atoms/{i}/v", n), _rat(a["p"], f"{ptr}/atoms/{i}/p"))
                      for i, a in enumerate(obj["atoms"]))
        return FiniteDiscrete(atoms)
    except ScenarioError:
        raise
    except (AsReachError, ValueError) as exc:
        raise ScenarioError(str(exc), ptr) from None


def validate_document(doc) -> None:
    """Schema check; the first error is raised with its JSON pointer."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        # descend into the deepest oneOf branch error for a precise pointer
        err = errors[-1]
        while err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise ScenarioError(err.message, _pointer(err.absolute_path))


def parse_system(doc: dict) -> Smms:
    n = doc["dimension"]
    return Smms(tuple(_mode(m, f"/modes/{i}", n) for i, m in enumerate(doc["modes"])), n)


def parse_safety(doc: dict) -> SafetySet | None:
    if "safety" not in doc:
        return None
    n = doc["dimension"]
    members = []
    for i, poly in enumerate(doc["safety"]):
        rows = tuple((_vec(r["a"], f"/safety/{i}/rows/{j}/a", n), _rat(r["b"], f"/safety/{i}/rows/{j}/b"))
                     for j, r in enumerate(poly["rows"]))
        try:
            members.append(ConvexPolytope(rows))
        except (AsReachError, ValueError) as exc:
            raise ScenarioError(str(exc), f"/safety/{i}") from None
    try:
        return SafetySet(tuple(members))
    except (AsReachError, ValueError) as exc:
        raise ScenarioError(str(exc), "/safety") from None


def load_document(source) -> dict:
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None
    validate_document(doc)
    return doc


def scenario_from_document(doc: dict) -> Scenario:
    n = doc["dimension"]
    for key in ("start", "target", "eps"):
        if key not in doc:
            raise ScenarioError(f"'{key}' is required for this command", "")
    if "safety" not in doc and "ball" not in doc:
        raise ScenarioError("'safety' or 'ball' is required for this command", "")
    system = parse_system(doc)
    safety = parse_safety(doc)
    ball = None
    if "ball" in doc:
        ball = Ball(tuple(float(x) for x in _vec(doc["ball"]["center"], "/ball/center", n)),
                    float(_rat(doc["ball"]["radius"], "/ball/radius")))
    eps = float(_rat(doc["eps"], "/eps"))
    if not eps > 0:
        raise ScenarioError("eps must be positive", "/eps")
    ctl = dict(doc.get("controller", {}))
    for key in ("delta_safety_factor", "delta_override"):
        if key in ctl:
            ctl[key] = float(_rat(ctl[key], f"/controller/{key}") if isinstance(ctl[key], str) else ctl[key])
    try:
        cfg = ControllerConfig(eps=eps, **ctl)
    except ValueError as exc:
        raise ScenarioError(str(exc), "/controller") from None
    planner = None
    if "planner" in doc:
        planner = PlannerConfig(**doc["planner"])
    path = None
    if "path" in doc:
        path = [[float(_rat(x, f"/path/{i}/{j}") if isinstance(x, str) else x) for j, x in enumerate(v)]
                for i, v in enumerate(doc["path"])]
        for i, v in enumerate(path):
            if len(v) != n:
                raise ScenarioError(f"expected {n} components", f"/path/{i}")
    start = tuple(float(x) for x in _vec(doc["start"], "/start", n))
    target = tuple(float(x) for x in _vec(doc["target"], "/target", n))
    try:
        return Scenario(system, start, target, eps, safety=safety, ball=ball, controller=cfg,
                        planner=planner, path=path, name=doc.get("name", ""))
    except AsReachError as exc:
        raise ScenarioError(str(exc), "") from None


def load_scenario(source) -> Scenario:
    return scenario_from_document(load_document(source))


def dump_document(doc: dict) -> dict:
    """Normalized copy of a scenario document (rationals in lowest terms)."""
    out = dict(doc)
    n = doc["dimension"]
    out["schema"] = SCHEMA_VERSION
    out["modes"] = parse_system(doc).to_json()
    if "safety" in doc:
        out["safety"] = parse_safety(doc).to_json()
    if "ball" in doc:
        out["ball"] = {"center": [str(x) for x in _vec(doc["ball"]["center"], "/ball/center", n)],
                       "radius": str(_rat(doc["ball"]["radius"], "/ball/radius"))}
    for key in ("start", "target"):
        if key in doc:
            out[key] = [str(x) for x in _vec(doc[key], "/" + key, n)]
    if "eps" in doc:
        out["eps"] = str(_rat(doc["eps"], "/eps"))
    return out


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled scenario, e.g. ``bundled_path("car")``."""
    return Path(str(resources.files("asreach") / "scenarios" / f"{name}.json"))


def bundled_names() -> list[str]:
    root = resources.files("asreach") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
