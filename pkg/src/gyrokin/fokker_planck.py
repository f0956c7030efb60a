"""Gyroaveraged linear Fokker-Planck operator.

For a constrained h = g/M the quadratic form of the diffusion matrix reduces to
|grad_y h|^2 / omega_c^2 + h_r^2 + h_v3^2, so

<Q_FP>(g) = (theta / (m tau)) [ div_y(M grad_y h) / omega_c^2
                               + (1/r) d_r(r M d_r h) + d_v3(M d_v3 h) ].

Fluxes sit on cell faces with M evaluated there analytically.  Faces at r = 0,
r = R_max and v3 = +-V3 carry zero flux.
"""

from __future__ import annotations

import numpy as np

from .grid import ReducedDensity
from .physics import maxwellian_rv

_E = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def l_matrix() -> np.ndarray:
    """Constant 6x6 diffusion matrix [[2(I - e3 e3), -E], [E, I]]."""
    P = np.diag([1.0, 1.0, 0.0])
    return np.block([[2.0 * P, -_E], [_E, np.eye(3)]])


def l_matrix_kernel(tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of {xi : L xi . xi = 0}, from the symmetric part."""
    L = l_matrix()
    w, V = np.linalg.eigh(0.5 * (L + L.T))
    return V[:, np.abs(w) < tol]


def _face_diff(h, axis, periodic):
    if periodic:
        return np.roll(h, -1, axis=axis) - h
    return np.diff(h, axis=axis)


def apply_qfp_avg(g: ReducedDensity, params) -> np.ndarray:
    grid = g.grid
    d1, d2, _, dr, dv = grid.steps
    r, v = grid.axes[3], grid.axes[4]
    M = maxwellian_rv(r[:, None], v[None, :], params)
    h = g.values / M
    oc2 = params.omega_c**2

    out = np.zeros(grid.shape)
    # perpendicular guiding-center directions, periodic; M does not depend on y
    for axis, d in ((0, d1), (1, d2)):
        F = M * _face_diff(h, axis, True) / d
        out += (F - np.roll(F, 1, axis=axis)) / (d * oc2)

    # radial faces r_{i+1/2} = (i+1) dr, i = 0..n_r-2
    rf = dr * np.arange(1, r.size)
    Fr = rf[:, None] * maxwellian_rv(rf[:, None], v[None, :], params) * _face_diff(h, 3, False) / dr
    pad = [(0, 0)] * 5
    pad[3] = (1, 1)
    Fr = np.pad(Fr, pad)
    out += (Fr[..., 1:, :] - Fr[..., :-1, :]) / (r[:, None] * dr)

    vf = -grid.V3 + dv * np.arange(1, v.size)
    Fv = maxwellian_rv(r[:, None], vf[None, :], params) * _face_diff(h, 4, False) / dv
    pad = [(0, 0)] * 5
    pad[4] = (1, 1)
    Fv = np.pad(Fv, pad)
    out += (Fv[..., 1:] - Fv[..., :-1]) / dv

    return params.theta / (params.m * params.tau) * out


def qfp_dissipation(g: ReducedDensity, params) -> float:
    """<apply_qfp_avg(g), g/M> on the grid measure."""
    M = maxwellian_rv(g.grid.axes[3][:, None], g.grid.axes[4][None, :], params)
    return float(np.sum(apply_qfp_avg(g, params) * g.values / M * g.grid.cell_volume))
