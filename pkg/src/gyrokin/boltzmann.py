"""Gyroaveraged linear Boltzmann operator on constrained densities.

<Q_B>(g) = (1/tau) [ M <int sigma f' dv'> - g <int sigma M' dv'> ]

The partner integral is 2 pi int r' dr' dv3' sum_z w_z sigma g(y - z/omega_c, r', v3').
On grids the partner cells are the grid cells and the shift is a Fourier multiplier,
so the discrete kernel is symmetric and Maxwellians are exact equilibria.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import InvariantCoords
from .grid import ReducedDensity
from .kernels import chi_quadrature
from .physics import CrossSection, maxwellian_rv
from .parallel import parallel_map
from .quadrature import partner_rule
from .shifts import INTERPOLATIONS, shift_symbols


@dataclass(frozen=True)
class BoltzmannAvgConfig:
    cs: CrossSection = field(default_factory=CrossSection)
    n_phi: int = 8
    n_alpha: int = 16
    n_rp: int = 24
    n_v3p: int = 24
    Rp_max: float = 8.0
    V3p_max: float = 8.0
    interpolation: str = "linear"

    def __post_init__(self):
        if self.n_alpha % 2:
            raise ValueError("n_alpha must be even for a symmetric discrete kernel")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")


def _sigma_matrix(cs, l, v, vp):
    w = v[:, None] - vp[None, :]
    return cs(np.sqrt(l * l + w * w))


def _loss_rate(grid, params, cfg):
    """(n_r, n_v3) array of (1/tau) <int sigma M' dv'> on grid partners."""
    _, _, _, dr, dv = grid.steps
    r, v = grid.axes[3], grid.axes[4]
    Mp = maxwellian_rv(r[:, None], v[None, :], params)
    out = np.zeros((r.size, v.size))
    for i, ri in enumerate(r):
        for k, rk in enumerate(r):
            q = chi_quadrature(ri, rk, cfg.n_phi, cfg.n_alpha)
            lp = q.l[:: cfg.n_alpha]
            wp = q.weights.reshape(cfg.n_phi, cfg.n_alpha).sum(axis=1)
            for l, w in zip(lp, wp):
                out[i] += w * 2.0 * np.pi * rk * dr * dv * (_sigma_matrix(cfg.cs, l, v, v) @ Mp[k])
    return out / params.tau


def _gain_grid(vals, grid, params, cfg):
    """(1/tau) M <int sigma g' dv'> evaluated on the grid."""
    _, _, _, dr, dv = grid.steps
    r, v = grid.axes[3], grid.axes[4]
    gh = np.fft.fft2(vals, axes=(0, 1))

    def slab(i):
        ri = r[i]
        acc = np.zeros(grid.shape[:3] + (v.size,), dtype=complex)
        for k, rk in enumerate(r):
            q = chi_quadrature(ri, rk, cfg.n_phi, cfg.n_alpha)
            sym = shift_symbols(grid, q.z / params.omega_c, cfg.interpolation)
            sym = (sym * q.weights[:, None, None]).reshape(cfg.n_phi, cfg.n_alpha, *sym.shape[1:]).sum(axis=1)
            for p in range(cfg.n_phi):
                A = 2.0 * np.pi * rk * dr * dv * _sigma_matrix(cfg.cs, q.l[p * cfg.n_alpha], v, v)
                acc += sym[p][:, :, None, None] * (gh[:, :, :, k, :] @ A.T)
        return np.fft.ifft2(acc, axes=(0, 1)).real

    out = np.stack(parallel_map(slab, range(r.size)), axis=3)
    return out * maxwellian_rv(r[:, None], v[None, :], params) / params.tau


def qb_gain(g, params, cfg: BoltzmannAvgConfig = BoltzmannAvgConfig(), nodes: InvariantCoords | None = None):
    if isinstance(g, ReducedDensity):
        return _gain_grid(g.values, g.grid, params, cfg)
    return _pointwise(g, nodes, params, cfg)[0]


def qb_loss(g, params, cfg: BoltzmannAvgConfig = BoltzmannAvgConfig(), nodes: InvariantCoords | None = None):
    if isinstance(g, ReducedDensity):
        return g.values * _loss_rate(g.grid, params, cfg)
    return _pointwise(g, nodes, params, cfg)[1]


def apply_qb_avg(g, params, cfg: BoltzmannAvgConfig = BoltzmannAvgConfig(), nodes: InvariantCoords | None = None):
    """Gain minus loss, on a ReducedDensity or for an analytic g(y, x3, r, v3) at nodes."""
    if isinstance(g, ReducedDensity):
        return _gain_grid(g.values, g.grid, params, cfg) - g.values * _loss_rate(g.grid, params, cfg)
    gain, loss = _pointwise(g, nodes, params, cfg)
    return gain - loss


def _pointwise(gfun, nodes: InvariantCoords, params, cfg):
    if nodes is None:
        raise ValueError("analytic densities need evaluation nodes")
    y = np.asarray(nodes.y, dtype=float).reshape(-1, 2)
    x3 = np.broadcast_to(nodes.x3, np.shape(nodes.r)).ravel()
    r = np.asarray(nodes.r, dtype=float).ravel()
    v3 = np.broadcast_to(nodes.v3, np.shape(nodes.r)).ravel()
    gain, loss = np.zeros(r.size), np.zeros(r.size)
    for n in range(r.size):
        rp, vp, wq = partner_rule(r[n], v3[n], cfg.n_rp, cfg.n_v3p, cfg.Rp_max, cfg.V3p_max)
        ggain = lloss = 0.0
        for a in range(rp.size):
            q = chi_quadrature(r[n], rp[a], cfg.n_phi, cfg.n_alpha)
            sig = cfg.cs(np.sqrt(q.l**2 + (v3[n] - vp[a]) ** 2))
            ws = q.weights * sig
            ys = y[n][None, :] - q.z / params.omega_c
            ggain += wq[a] * np.sum(ws * gfun(ys, x3[n], rp[a], vp[a]))
            lloss += wq[a] * np.sum(ws) * maxwellian_rv(rp[a], vp[a], params)
        gain[n] = 2.0 * np.pi * ggain * maxwellian_rv(r[n], v3[n], params)
        loss[n] = 2.0 * np.pi * lloss * float(gfun(y[n][None, :], x3[n], r[n], v3[n])[0])
    shape = np.shape(nodes.r)
    return gain.reshape(shape) / params.tau, loss.reshape(shape) / params.tau


def qb_entropy_production(g: ReducedDensity, params, cfg: BoltzmannAvgConfig = BoltzmannAvgConfig()) -> float:
    """-(1/2) sum W M M' (g/M - g'/M')^2 for the symmetric discrete kernel W.

    Evaluated through the kernel action K[x] = gain of x / M, which turns the square into
    three linear pieces.  It equals <apply_qb_avg(g), g/M> to rounding.
    """
    grid = g.grid
    M = maxwellian_rv(grid.axes[3][:, None], grid.axes[4][None, :], params)
    h = g.values / M
    vol = grid.cell_volume
    K = lambda x: _gain_grid(x, grid, params, cfg) / M  # noqa: E731
    KM = _loss_rate(grid, params, cfg)  # = K[M] for y-independent arguments
    t1 = np.sum(vol * M * h * h * KM)
    t2 = np.sum(vol * M * h * K(M * h))
    t3 = np.sum(vol * M * K(M * h * h))
    return float(-0.5 * (t1 - 2.0 * t2 + t3))


def qb_oracle(f, p, params, cs, cfg=None, vq=None):
    """Nested-quadrature <Q_B(f)> in full coordinates, for phase points p."""
    from .gyroaverage import GyroQuadratureConfig, VelocityQuadrature, gyroaverage_integral_operator
    from .physics import maxwellian

    cfg = cfg or GyroQuadratureConfig()
    vq = vq or VelocityQuadrature()

    def c_gain(v, vp):
        d = v - vp
        return cs(np.sqrt(np.sum(d * d, axis=-1))) * maxwellian(v, params)

    def c_loss(v, vp):
        d = v - vp
        return cs(np.sqrt(np.sum(d * d, axis=-1))) * maxwellian(vp, params)

    gain = gyroaverage_integral_operator(c_gain, f, p, params, cfg, vq)
    loss = gyroaverage_integral_operator(c_loss, lambda pp: np.ones(np.shape(pp.x3)), p, params, cfg, vq)
    return (gain - f(p) * loss) / params.tau
