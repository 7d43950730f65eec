"""Scenario files: JSON schema, loading, hypothesis checks and parameter paths.

Regimes and mode indices are 1-based in files and 0-based in memory.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .ctmc import validate_generator
from .engine import LinearDynamics, Scenario, SemilinearDynamics
from .errors import (BadParamPath, DomainViolation, EvalDomainError, HypothesisViolation,
                     NonpositiveD, ScenarioError)
from .jumps import ParametricMeasure, atomic, atomic_profile, parametric_profile
from .spectral import dirichlet_basis, project_initial, user_basis

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_STRS = {"type": "array", "items": {"type": "string"}, "minItems": 1}


def _obj(props, required, **extra):
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False, **extra}


SCHEMA = _obj({
    "description": {"type": "string"},
    "generator": {"type": "array", "minItems": 1, "items": _NUMS},
    "r0": {"type": "integer", "minimum": 1},
    "spectral": {"oneOf": [
        _obj({"kind": {"const": "dirichlet_interval"}, "length": _POS,
              "modes": {"type": "integer", "minimum": 1}, "diffusivity": _POS},
             ["kind", "length", "modes"]),
        _obj({"kind": {"const": "user"}, "eigenvalues": _NUMS}, ["kind", "eigenvalues"]),
    ]},
    "initial": {"oneOf": [
        _obj({"kind": {"const": "mode"}, "index": {"type": "integer", "minimum": 1},
              "amplitude": _NUM}, ["kind", "index"]),
        _obj({"kind": {"const": "modes"}, "amplitudes": _NUMS}, ["kind", "amplitudes"]),
        _obj({"kind": {"const": "grid_expr"}, "expr": {"type": "string"},
              "points": {"type": "integer", "minimum": 3}}, ["kind", "expr"]),
    ]},
    "dynamics": {"oneOf": [
        _obj({"kind": {"const": "linear"}, "alpha": _NUMS, "beta": _NUMS},
             ["kind", "alpha", "beta"]),
        _obj({"kind": {"const": "semilinear"}, "drift": _STRS, "diffusion": _STRS,
              "b": _NUMS, "d": _NUMS, "nu": _POS,
              "grid_points": {"type": "integer", "minimum": 1}},
             ["kind", "drift", "diffusion"]),
    ]},
    "jumps": {"oneOf": [
        {"type": "null"},
        _obj({"kind": {"const": "atomic"},
              "atoms": {"type": "array", "minItems": 1, "items": _obj(
                  {"rate": _POS, "mark": _NUM, "gamma": _NUMS}, ["rate", "gamma"])}},
             ["kind", "atoms"]),
        _obj({"kind": {"const": "parametric"}, "rate": _POS,
              "density": {"type": "string"}, "gamma": _STRS,
              "support": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
             ["kind", "rate", "density", "gamma"]),
    ]},
    "sim": _obj({"T": _POS, "dt": _POS, "paths": {"type": "integer", "minimum": 1},
                 "seed": {"type": "integer", "minimum": 0},
                 "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                 "sample_stride": {"type": "integer", "minimum": 1}},
                ["T", "dt"]),
}, ["generator", "r0", "spectral", "initial", "dynamics", "sim"])

SIM_DEFAULTS = {"paths": 64, "seed": 0, "burn_in": 0.2, "sample_stride": 1}

# sample range for the pointwise semilinear bounds
BOUND_CHECK_X = np.linspace(-10.0, 10.0, 2001)


@dataclass(frozen=True, eq=False)
class LoadedScenario:
    scenario: Scenario
    sim: dict
    nu: float
    doc: dict


def schema_errors(doc) -> list:
    """Human-readable schema violations, each prefixed by its dotted location."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    out = []
    for err in sorted(v.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        # oneOf failures are more useful reported through their best branch
        best = jsonschema.exceptions.best_match([err])
        out.append(f"{where}: {best.message}")
    return out


def read_document(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None


def _regimes(name, values, m):
    if len(values) != m:
        raise ScenarioError(f"{name}: {len(values)} entries for {m} regimes")
    return values


def _check_semilinear_bounds(dyn, m):
    x = BOUND_CHECK_X
    for i in range(m):
        try:
            f = np.broadcast_to(dyn.drift[i](x), x.shape)
            g = np.broadcast_to(dyn.diffusion[i](x), x.shape)
        except EvalDomainError as exc:
            raise DomainViolation(f"dynamics regime {i + 1}: {exc}") from None
        if dyn.b is not None:
            excess = 2 * x * f + g ** 2 - dyn.b[i] * x ** 2
            if np.any(excess > 1e-9 * (1 + x ** 2)):
                k = int(np.argmax(excess))
                raise HypothesisViolation(
                    f"dynamics.b.{i}: 2 x f + g^2 <= b x^2 fails at x = {x[k]!r}")
        if dyn.d is not None:
            if dyn.d[i] <= 0:
                raise NonpositiveD(f"dynamics.d.{i}: d must be positive, got {dyn.d[i]!r}")
            short = np.sqrt(dyn.d[i]) * x ** 2 - x * g
            if np.any(short > 1e-9 * (1 + x ** 2)):
                k = int(np.argmax(short))
                raise HypothesisViolation(
                    f"dynamics.d.{i}: x g >= sqrt(d) x^2 fails at x = {x[k]!r}")


def build(doc: dict) -> LoadedScenario:
    """Turn a schema-valid document into a scenario, checking every hypothesis.

    Raises ``ScenarioError`` for structural problems the schema cannot see and
    a ``HypothesisViolation`` subclass when the data break a model hypothesis.
    """
    errs = schema_errors(doc)
    if errs:
        raise ScenarioError("; ".join(errs))
    g = validate_generator(doc["generator"])
    m = g.m
    if doc["r0"] > m:
        raise ScenarioError(f"r0: regime {doc['r0']} outside 1..{m}")
    sp = doc["spectral"]
    if sp["kind"] == "dirichlet_interval":
        basis = dirichlet_basis(sp["modes"], sp["length"], sp.get("diffusivity", 1.0))
    else:
        try:
            basis = user_basis(sp["eigenvalues"])
        except ValueError as exc:
            raise ScenarioError(f"spectral.eigenvalues: {exc}") from None
    try:
        initial = project_initial(doc["initial"], basis)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"initial: {exc}") from None
    except EvalDomainError as exc:
        raise DomainViolation(f"initial.expr: {exc}") from None

    dd = doc["dynamics"]
    nu = float(basis.eigenvalues[0])
    if dd["kind"] == "linear":
        dyn = LinearDynamics(_regimes("dynamics.alpha", dd["alpha"], m),
                             _regimes("dynamics.beta", dd["beta"], m))
    else:
        if basis.kind != "dirichlet_interval":
            raise ScenarioError("dynamics: semilinear dynamics need an interval basis")
        for key in ("drift", "diffusion", "b", "d"):
            if key in dd:
                _regimes(f"dynamics.{key}", dd[key], m)
        dyn = SemilinearDynamics(tuple(dd["drift"]), tuple(dd["diffusion"]),
                                 dd.get("b"), dd.get("d"), dd.get("grid_points"))
        _check_semilinear_bounds(dyn, m)
        if "nu" in dd:
            if dd["nu"] > nu * (1 + 1e-12):
                raise HypothesisViolation(
                    f"dynamics.nu: {dd['nu']!r} exceeds the bottom of the spectrum {nu!r}")
            nu = float(dd["nu"])

    jd = doc.get("jumps")
    measure = profile = None
    if jd is not None:
        if jd["kind"] == "atomic":
            atoms = jd["atoms"]
            rates = [a["rate"] for a in atoms]
            marks = ([a["mark"] for a in atoms] if all("mark" in a for a in atoms) else None)
            for k, a in enumerate(atoms):
                _regimes(f"jumps.atoms.{k}.gamma", a["gamma"], m)
            try:
                measure = atomic(rates, marks)
            except ValueError as exc:
                raise ScenarioError(f"jumps.atoms: {exc}") from None
            profile = atomic_profile(measure, [a["gamma"] for a in atoms])
        else:
            _regimes("jumps.gamma", jd["gamma"], m)
            support = tuple(jd.get("support", (0.0, float("inf"))))
            try:
                measure = ParametricMeasure(jd["rate"], jd["density"], support)
            except ValueError as exc:
                raise ScenarioError(f"jumps.density: {exc}") from None
            profile = parametric_profile(measure, jd["gamma"])

    sim = dict(SIM_DEFAULTS)
    sim.update(doc["sim"])
    if sim["dt"] > sim["T"]:
        raise ScenarioError("sim.dt: step exceeds the horizon")
    s = Scenario(g, doc["r0"] - 1, basis, initial, dyn, measure, profile,
                 float(sim["T"]), float(sim["dt"]))
    return LoadedScenario(s, sim, nu, doc)


def load(path) -> LoadedScenario:
    return build(read_document(path))


def _split(path: str):
    if not path:
        raise BadParamPath("empty parameter path")
    return [int(p) if p.lstrip("-").isdigit() else p for p in path.split(".")]


def get_param(doc, path: str):
    node = doc
    for key in _split(path):
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise BadParamPath(f"{path}: no field {key!r}") from None
    return node


def set_param(doc, path: str, value) -> dict:
    """Copy of ``doc`` with the numeric field at dotted ``path`` replaced.

    Array positions are 0-based JSON indices, e.g. ``generator.1.0``.
    """
    keys = _split(path)
    current = get_param(doc, path)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise BadParamPath(f"{path}: field is not numeric")
    out = copy.deepcopy(doc)
    node = out
    for key in keys[:-1]:
        node = node[key]
    if isinstance(current, int) and float(value).is_integer():
        value = int(value)
    node[keys[-1]] = value
    return out
