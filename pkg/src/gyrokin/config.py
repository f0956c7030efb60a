"""Run configuration: JSON schema validation and construction of library objects."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .boltzmann import BoltzmannAvgConfig
from .geometry import PhasePoint, to_invariants
from .grid import ReducedGrid
from .landau import FplConfig
from .physics import CrossSection, PlasmaParams, Potential, maxwellian
from .solver import LIMITERS, MODELS, SPLITTINGS, SolverConfig


class ConfigError(ValueError):
    """Invalid configuration; the message lists field paths."""


_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_NUM = {"type": "number"}
_POSINT = {"type": "integer", "minimum": 1}


def _vec(n, item=_NUM):
    return {"type": "array", "items": item, "minItems": n, "maxItems": n}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj({
    "plasma": _obj({"q": {"type": "number", "not": {"const": 0}}, "m": _POS, "B": _POS, "theta": _POS, "tau": _POS}),
    "cross_section": _obj({
        "family": {"enum": ["constant", "power-law"]}, "sigma0": _POS, "gamma": _NONNEG, "delta": _NONNEG,
        "s_min": _NONNEG, "s_max": _POS}),
    "potential": _obj({
        "family": {"enum": ["uniform", "harmonic", "separable"]}, "gradient": _vec(3), "k_perp": _NUM,
        "k_par": _NUM, "center": _vec(3), "a_perp": _NUM, "wavenumbers": _vec(2), "a_par": _NUM, "kz": _NUM}),
    "grid": _obj({
        "L": _vec(2, _POS), "n_y": _vec(2, {"type": "integer", "minimum": 2}), "L3": _POS, "n3": _POSINT,
        "R_max": _POS, "n_r": {"type": "integer", "minimum": 3}, "V3": _POS,
        "n_v3": {"type": "integer", "minimum": 3}}),
    "quadrature": _obj({
        "n_phi": {"type": "integer", "minimum": 2}, "n_alpha": {"type": "integer", "minimum": 4, "multipleOf": 2},
        "n_gyro": {"type": "integer", "minimum": 4}, "interpolation": {"enum": ["linear", "spectral"]}}),
    "solver": _obj({
        "model": {"enum": list(MODELS)}, "T": _POS, "dt": {"anyOf": [_POS, {"type": "null"}]},
        "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.9}, "splitting": {"enum": list(SPLITTINGS)},
        "cadence": _POSINT, "limiter": {"enum": list(LIMITERS)}, "landau_substeps": _POSINT}),
    "initial": _obj({
        "kind": {"enum": ["maxwellian", "gaussian", "perturbed"]}, "density": _POS, "center": _vec(2),
        "width": _POS, "temperature": _POS, "v3_shift": _NUM, "amplitude": _NONNEG, "mode": _vec(2, {"type": "integer"})}),
    "output": _obj({"directory": {"type": "string", "minLength": 1}, "snapshots": {"type": "boolean"}}),
    "drift_check": _obj({"T": _POS, "x0": _vec(3), "v0": _vec(3), "eps": {"type": "array", "items": _POS, "minItems": 2}}),
    "seed": {"type": "integer", "minimum": 0},
}, required=("grid", "solver"))


def _path(err) -> str:
    parts = ["config"] + [f"[{p}]" if isinstance(p, int) else str(p) for p in err.absolute_path]
    return ".".join(parts).replace(".[", "[")


def validate(doc: dict) -> None:
    errors = sorted(Draft202012Validator(SCHEMA).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError("; ".join(f"{_path(e)}: {e.message}" for e in errors))


def _coerce_ints(doc, schema):
    """JSON counts 4.0 as an integer; hand such values on as int."""
    if schema.get("type") == "integer" and isinstance(doc, float):
        return int(doc)
    if isinstance(doc, dict) and "properties" in schema:
        return {k: _coerce_ints(v, schema["properties"].get(k, {})) for k, v in doc.items()}
    if isinstance(doc, list) and "items" in schema:
        return [_coerce_ints(v, schema["items"]) for v in doc]
    return doc


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "maxwellian"
    density: float = 1.0
    center: tuple = (0.0, 0.0)
    width: float = 1.0
    temperature: float = 1.0
    v3_shift: float = 0.0
    amplitude: float = 0.0
    mode: tuple = (1, 0)

    def full_density(self, params: PlasmaParams, grid: ReducedGrid):
        """f_in(x, v) in full coordinates; the solver projects it with the gyroaverage."""

        def f(p: PhasePoint):
            v = p.velocity.copy()
            v[..., 2] -= self.v3_shift
            if self.kind == "gaussian" or self.temperature != 1.0:
                a = params.m / (params.theta * self.temperature)
                mv = (a / (2 * np.pi)) ** 1.5 * np.exp(-0.5 * a * np.sum(v * v, axis=-1))
            else:
                mv = maxwellian(v, params)
            out = self.density * mv
            if self.kind == "gaussian":
                d = p.x_perp - np.asarray(self.center)
                out = out * np.exp(-0.5 * np.sum(d * d, axis=-1) / self.width**2)
            elif self.kind == "perturbed":
                k = 2 * np.pi * np.asarray(self.mode) / np.asarray(grid.L)
                out = out * (1.0 + self.amplitude * np.cos(p.x_perp @ k))
            return out

        return f


@dataclass(frozen=True)
class RunConfig:
    params: PlasmaParams
    cs: CrossSection
    potential: Potential
    grid: ReducedGrid
    solver: SolverConfig
    initial: InitialCondition
    output_dir: Path
    snapshots: bool
    seed: int
    drift: dict
    raw: dict


def _build(section: str, fn, kwargs):
    try:
        return fn(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config.{section}: {exc}") from exc


def from_dict(doc: dict, base_dir: Path | None = None) -> RunConfig:
    validate(doc)
    doc = _coerce_ints(doc, SCHEMA)
    params = _build("plasma", PlasmaParams, doc.get("plasma", {}))
    cs = _build("cross_section", CrossSection, doc.get("cross_section", {}))
    pd = dict(doc.get("potential", {}))
    for key in ("gradient", "center", "wavenumbers"):
        if key in pd:
            pd[key] = tuple(pd[key])
    pot = _build("potential", Potential, pd)
    gd = dict(doc["grid"])
    for key in ("L", "n_y"):
        if key in gd:
            gd[key] = tuple(gd[key])
    grid = _build("grid", ReducedGrid, gd)
    quad = doc.get("quadrature", {})
    interp = quad.get("interpolation")
    bz = {k: quad[k] for k in ("n_phi", "n_alpha") if k in quad}
    bcfg = _build("quadrature", BoltzmannAvgConfig, dict(cs=cs, **bz, **({"interpolation": interp} if interp else {})))
    lcfg = _build("quadrature", FplConfig, dict(cs=cs, **bz, **({"interpolation": interp} if interp else {})))
    sd = dict(doc["solver"])
    solver = _build("solver", SolverConfig, dict(boltzmann=bcfg, landau=lcfg, n_gyro=quad.get("n_gyro", 32), **sd))
    ini = dict(doc.get("initial", {}))
    for key in ("center", "mode"):
        if key in ini:
            ini[key] = tuple(ini[key])
    initial = _build("initial", InitialCondition, ini)
    out = doc.get("output", {})
    out_dir = Path(out.get("directory", "gyrokin-out"))
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    return RunConfig(params, cs, pot, grid, solver, initial, out_dir, out.get("snapshots", True),
                     doc.get("seed", 0), doc.get("drift_check", {}), doc)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    return from_dict(doc, base_dir=None)


__all__ = ["ConfigError", "SCHEMA", "validate", "from_dict", "load", "RunConfig", "InitialCondition", "to_invariants"]
