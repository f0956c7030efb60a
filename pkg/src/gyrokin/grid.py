"""Reduced guiding-center grids, constrained densities and invariant calculus.

Array layout is g[y1, y2, x3, r, v3].  The mass measure is
2 pi r dr dv3 dy1 dy2 dx3; the 2 pi gyrophase factor lives in the measure, not in g.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import Gyrophase, InvariantCoords, from_invariants
from .gyroaverage import GyroQuadratureConfig, gyroaverage_scalar

AXES = ("y1", "y2", "x3", "r", "v3")


@dataclass(frozen=True)
class ReducedGrid:
    L: tuple = (8.0, 8.0)
    n_y: tuple = (16, 16)
    L3: float = 1.0
    n3: int = 1
    R_max: float = 4.0
    n_r: int = 12
    V3: float = 4.0
    n_v3: int = 16

    def __post_init__(self):
        if min(self.L) <= 0 or self.L3 <= 0 or self.R_max <= 0 or self.V3 <= 0:
            raise ValueError("grid extents must be positive")
        if min(self.n_y) < 2 or self.n3 < 1 or self.n_r < 3 or self.n_v3 < 3:
            raise ValueError("grid resolution too small")

    @property
    def shape(self) -> tuple:
        return (self.n_y[0], self.n_y[1], self.n3, self.n_r, self.n_v3)

    @property
    def steps(self) -> tuple:
        return (self.L[0] / self.n_y[0], self.L[1] / self.n_y[1], self.L3 / self.n3,
                self.R_max / self.n_r, 2.0 * self.V3 / self.n_v3)

    @cached_property
    def axes(self) -> tuple:
        d1, d2, d3, dr, dv = self.steps
        return (
            d1 * np.arange(self.n_y[0]),
            d2 * np.arange(self.n_y[1]),
            d3 * np.arange(self.n3),
            dr * (np.arange(self.n_r) + 0.5),
            -self.V3 + dv * (np.arange(self.n_v3) + 0.5),
        )

    def mesh(self):
        """Broadcastable coordinate arrays (y1, y2, x3, r, v3)."""
        out = []
        for k, a in enumerate(self.axes):
            shape = [1] * 5
            shape[k] = a.size
            out.append(a.reshape(shape))
        return tuple(out)

    @cached_property
    def cell_volume(self) -> np.ndarray:
        """Measure weight of each node, broadcastable to shape."""
        d1, d2, d3, dr, dv = self.steps
        _, _, _, r, _ = self.mesh()
        return 2.0 * np.pi * r * dr * dv * d1 * d2 * d3

    def invariant_coords(self) -> InvariantCoords:
        y1, y2, x3, r, v3 = (np.broadcast_to(a, self.shape) for a in self.mesh())
        return InvariantCoords(np.stack([y1, y2], axis=-1), x3, r, v3)

    def to_json(self) -> dict:
        return {"L": list(self.L), "n_y": list(self.n_y), "L3": self.L3, "n3": self.n3,
                "R_max": self.R_max, "n_r": self.n_r, "V3": self.V3, "n_v3": self.n_v3}


@dataclass
class ReducedDensity:
    grid: ReducedGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def mass(self) -> float:
        return float(np.sum(self.values * self.grid.cell_volume))

    def integrate(self, weight) -> float:
        return float(np.sum(self.values * weight * self.grid.cell_volume))

    def copy(self) -> "ReducedDensity":
        return ReducedDensity(self.grid, self.values.copy(), dict(self.meta))

    @classmethod
    def from_function(cls, grid: ReducedGrid, fn, **meta) -> "ReducedDensity":
        """Sample fn(y, x3, r, v3) with y of shape (..., 2) at every node."""
        inv = grid.invariant_coords()
        vals = np.broadcast_to(fn(inv.y, inv.x3, inv.r, inv.v3), grid.shape)
        return cls(grid, np.array(vals, dtype=float), dict(meta))


# one-dimensional difference matrices ------------------------------------------------

def _periodic_matrix(n, h):
    D = np.zeros((n, n))
    i = np.arange(n)
    D[i, (i + 1) % n] += 0.5 / h
    D[i, (i - 1) % n] -= 0.5 / h
    return D


def _open_matrix(n, h, even_left=False):
    """Central interior; left end even reflection or one-sided; right end one-sided."""
    D = np.zeros((n, n))
    for i in range(1, n - 1):
        D[i, i + 1], D[i, i - 1] = 0.5 / h, -0.5 / h
    if even_left:
        # ghost value g[-1] = g[0] across the axis
        D[0, 1], D[0, 0] = 0.5 / h, -0.5 / h
    else:
        D[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    D[n - 1, n - 3:n] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    return D


@dataclass(frozen=True)
class Stencils:
    """Gradient matrices per axis and their measure-adjoint divergences."""

    grid: ReducedGrid

    @cached_property
    def grad(self) -> tuple:
        g = self.grid
        d1, d2, d3, dr, dv = g.steps
        return (_periodic_matrix(g.n_y[0], d1), _periodic_matrix(g.n_y[1], d2),
                _periodic_matrix(g.n3, d3) if g.n3 > 2 else np.zeros((g.n3, g.n3)),
                _open_matrix(g.n_r, dr, even_left=True), _open_matrix(g.n_v3, dv))

    @cached_property
    def div(self) -> tuple:
        """-W^{-1} D^T W with W the axis measure weight (r on the radial axis)."""
        out = []
        for k, D in enumerate(self.grad):
            if k == 3:
                w = self.grid.axes[3]
                out.append(-(D.T * w[None, :]) / w[:, None])
            else:
                out.append(-D.T)
        return tuple(out)


def _apply(mat, arr, axis):
    return np.moveaxis(np.tensordot(mat, arr, axes=([1], [axis])), 0, axis)


def invariant_gradient(g, grid: ReducedGrid | None = None, idx=None):
    """(d_psi1 g, ..., d_psi5 g) on the grid, shape (5,) + grid.shape, or at one index."""
    if isinstance(g, ReducedDensity):
        grid, vals = g.grid, g.values
    else:
        vals = np.asarray(g, dtype=float)
    st = _stencils(grid)
    out = np.stack([_apply(st.grad[k], vals, k) for k in range(5)])
    if idx is not None:
        return out[(slice(None),) + tuple(idx)]
    return out


def reduced_divergence(flux_components, grid: ReducedGrid):
    """sum_i d_psi_i F_i + F_4 / r, realized as the measure-adjoint of -invariant_gradient.

    flux_components has shape (5,) + grid.shape (entries may be None or zero).
    """
    st = _stencils(grid)
    out = np.zeros(grid.shape)
    for k in range(5):
        F = flux_components[k]
        if F is None:
            continue
        F = np.broadcast_to(np.asarray(F, dtype=float), grid.shape)
        if not np.any(F):
            continue
        out += _apply(st.div[k], F, k)
    return out


_STENCIL_CACHE: dict = {}


def _stencils(grid: ReducedGrid) -> Stencils:
    st = _STENCIL_CACHE.get(grid)
    if st is None:
        st = _STENCIL_CACHE[grid] = Stencils(grid)
    return st


def grad_psi_omega(i: int, alpha, omega_c: float) -> np.ndarray:
    """grad psi_i in (omega_c x, v) units at gyrophase alpha; shape alpha.shape + (6,)."""
    alpha = np.asarray(alpha, dtype=float)
    out = np.zeros(alpha.shape + (6,))
    if i == 1:
        out[..., 0], out[..., 4] = 1.0 / omega_c, 1.0 / omega_c
    elif i == 2:
        out[..., 1], out[..., 3] = 1.0 / omega_c, -1.0 / omega_c
    elif i == 3:
        out[..., 2] = 1.0 / omega_c
    elif i == 4:
        out[..., 3], out[..., 4] = np.cos(alpha), np.sin(alpha)
    elif i == 5:
        out[..., 5] = 1.0
    else:
        raise ValueError("only psi_1..psi_5 are used for constrained densities")
    return out


def full_gradient(g, idx, alpha, params, grid: ReducedGrid | None = None):
    """grad_{omega_c x, v} of the constrained density at node idx and gyrophase alpha."""
    dg = invariant_gradient(g, grid, idx=idx)
    alpha = np.asarray(alpha, dtype=float)
    out = np.zeros(alpha.shape + (6,))
    for i in range(1, 6):
        out += dg[i - 1] * grad_psi_omega(i, alpha, params.omega_c)
    return out


def project_initial(f_full, grid: ReducedGrid, params, cfg: GyroQuadratureConfig = GyroQuadratureConfig()):
    """g = <f_in> sampled on the grid: average along the Larmor circle through each node."""
    inv = grid.invariant_coords()
    p = from_invariants(inv, Gyrophase(np.zeros(grid.shape)), params.omega_c)
    vals = gyroaverage_scalar(f_full, p, params, cfg)
    return ReducedDensity(grid, vals, {"source": "project_initial"})
