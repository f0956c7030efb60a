"""Diagnostics records, CSV output and binary snapshots."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import AXES, ReducedDensity, ReducedGrid
from .physics import maxwellian_rv

CSV_COLUMNS = ("time", "mass", "px", "py", "pz", "ekin", "entropy", "larmor_cx", "larmor_cy",
               "larmor_power", "entropy_prod", "l2m")
CSV_VERSION = 1
SNAPSHOT_FORMAT_VERSION = 1
LOG_FLOOR = 1e-300


def entropy(g: ReducedDensity) -> float:
    """int g ln g with 0 ln 0 = 0."""
    v = g.values
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(v > 0, v * np.log(np.maximum(v, LOG_FLOOR)), 0.0)
    return float(np.sum(t * g.grid.cell_volume))


def maxwellian_density(grid: ReducedGrid, params) -> np.ndarray:
    return np.broadcast_to(maxwellian_rv(grid.axes[3][:, None], grid.axes[4][None, :], params), grid.shape)


def l2m_distance(g: ReducedDensity, params) -> float:
    """||g - c M|| in L^2(M^-1), c matching the mass of g."""
    M = maxwellian_density(g.grid, params)
    vol = g.grid.cell_volume
    c = g.mass() / float(np.sum(M * vol))
    return float(np.sqrt(np.sum((g.values - c * M) ** 2 / M * vol)))


def compute_diagnostics(g: ReducedDensity, params, time: float, cfg=None, rate=None) -> dict:
    """One row of CSV_COLUMNS.

    entropy_prod is sum mu <Q>(g) ln g, the rate of the entropy column under collisions;
    the rate field is recomputed unless given.
    """
    grid = g.grid
    y1, y2, _, r, v3 = grid.mesh()
    mass = g.mass()
    safe = mass if mass != 0 else 1.0
    ent_prod = 0.0
    if cfg is not None and cfg.model != "none":
        from .solver import collision_rate

        q = collision_rate(g, cfg.model, params, cfg) if rate is None else rate
        ent_prod = float(np.sum(q * np.log(np.maximum(g.values, LOG_FLOOR)) * grid.cell_volume))
    return {
        "time": float(time),
        "mass": mass,
        "px": 0.0,
        "py": 0.0,
        "pz": g.integrate(v3),
        "ekin": g.integrate(0.5 * (r * r + v3 * v3)),
        "entropy": entropy(g),
        "larmor_cx": g.integrate(y1) / safe,
        "larmor_cy": g.integrate(y2) / safe,
        "larmor_power": g.integrate(y1 * y1 + y2 * y2 - r * r / params.omega_c**2) / safe,
        "entropy_prod": ent_prod,
        "l2m": l2m_distance(g, params),
    }


class DiagnosticsWriter:
    """Streams records to diagnostics.csv with the frozen column order."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(CSV_COLUMNS)

    def write(self, rec: dict) -> None:
        self._w.writerow([repr(float(rec[c])) for c in CSV_COLUMNS])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = tuple(rows[0])
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    return {name: data[:, k] if data.size else np.array([]) for k, name in enumerate(header)}


def dump_snapshot(g: ReducedDensity, base, params=None, time: float | None = None,
                  extra: dict | None = None) -> tuple[Path, Path]:
    """Write base.bin (row-major float64 little-endian) and base.meta.json."""
    base = Path(base)
    bin_path = base.with_name(base.name + ".bin")
    meta_path = base.with_name(base.name + ".meta.json")
    np.ascontiguousarray(g.values, dtype="<f8").tofile(bin_path)
    meta = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "dtype": "float64-le",
        "order": "C",
        "axes": list(AXES),
        "shape": list(g.grid.shape),
        "grid": g.grid.to_json(),
        "coordinates": {name: ax.tolist() for name, ax in zip(AXES, g.grid.axes)},
        "time": time,
        "params": None if params is None else {k: getattr(params, k) for k in ("q", "m", "B", "theta", "tau")},
    }
    meta.update(extra or {})
    meta_path.write_text(json.dumps(meta, indent=1))
    return bin_path, meta_path


def load_snapshot(base) -> tuple[ReducedDensity, dict]:
    base = Path(base)
    if base.suffix == ".bin":
        base = base.with_suffix("")
    meta = json.loads(base.with_name(base.name + ".meta.json").read_text())
    if meta.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot format version {meta.get('format_version')!r}")
    gj = meta["grid"]
    grid = ReducedGrid(L=tuple(gj["L"]), n_y=tuple(gj["n_y"]), L3=gj["L3"], n3=gj["n3"], R_max=gj["R_max"],
                       n_r=gj["n_r"], V3=gj["V3"], n_v3=gj["n_v3"])
    vals = np.fromfile(base.with_name(base.name + ".bin"), dtype="<f8").reshape(meta["shape"])
    return ReducedDensity(grid, vals), meta
