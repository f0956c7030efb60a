"""Gyroaveraged Fokker-Planck-Landau operator on constrained densities.

For constrained densities every contraction xi^i . grad f reduces to invariant
derivatives.  With G = grad_y g / omega_c, u = v/r, w = v3 - v3', rho^2 = |z|^2 + w^2
and the partner at y' = y - z/omega_c the contractions are

  a2 = perp(zh).G                 b2 = -perp(zh).G'
  a3 = -(r' s/|z|) g_r            b3 = -(r s/|z|) g'_r
  a4 = [-(r'c - r) w/|z| g_r + w zh.G - |z| g_v] / rho
  b4 = [(r c - r') w/|z| g'_r + w zh.G' - |z| g'_v] / rho

(a1 = b1 = 0), c_i = g' a_i - eps_i g b_i, and the flux components entering the
reduced divergence are

  F_y = sigma/omega_c [perp(zh) c2 + (w/rho) zh c4]
  F_r = sigma [-(r' s/|z|) c3 - (r'c - r) w/(|z| rho) c4]
  F_v3 = -sigma (|z|/rho) c4

summed against 2 pi r' dr' dv3' and the chi quadrature.  On grids each shifted
partner field is a Fourier multiplier, so the gyrophase sum is done in k-space.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .geometry import InvariantCoords, PhasePoint
from .grid import ReducedDensity, ReducedGrid, _stencils, _apply, reduced_divergence
from .gyroaverage import GyroQuadratureConfig, VelocityQuadrature, _circle, _projector
from .kernels import EPS_SIGNS, chi_quadrature
from .physics import CrossSection, maxwellian_rv
from .parallel import parallel_map
from .quadrature import partner_rule
from .shifts import INTERPOLATIONS, shift_symbols


@dataclass(frozen=True)
class FplConfig:
    cs: CrossSection = field(default_factory=CrossSection)
    n_phi: int = 6
    n_alpha: int = 16
    n_rp: int = 16
    n_v3p: int = 16
    Rp_max: float = 8.0
    V3p_max: float = 8.0
    interpolation: str = "spectral"
    floor: float = 1e-300

    def __post_init__(self):
        if self.n_phi < 2 or self.n_alpha < 4 or self.n_alpha % 2:
            raise ValueError("need n_phi >= 2 and an even n_alpha >= 4")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        if not self.floor > 0:
            raise ValueError("floor must be positive")


# field slots: 0 g, 1 G1, 2 G2, 3 g_r, 4 g_v3
# a c-term is (sign, coefficient atoms, direction factors zh_k, unprimed slot, primed slot)
_C2 = [(1, (), (2,), 1, 0), (-1, (), (1,), 2, 0), (-1, (), (2,), 0, 1), (1, (), (1,), 0, 2)]
_C3 = [(-1, ("rp_s_l",), (), 3, 0), (1, ("r_s_l",), (), 0, 3)]
_C4 = [(-1, ("A", "w_rho"), (), 3, 0), (1, ("w_rho",), (1,), 1, 0), (1, ("w_rho",), (2,), 2, 0),
       (-1, ("l_rho",), (), 4, 0), (-1, ("B", "w_rho"), (), 0, 3), (-1, ("w_rho",), (1,), 0, 1),
       (-1, ("w_rho",), (2,), 0, 2), (1, ("l_rho",), (), 0, 4)]
# output slot -> list of (c-terms, sign, atoms, direction factors)
_OUT = {
    0: [(_C2, 1, (), (2,)), (_C4, 1, ("w_rho",), (1,))],
    1: [(_C2, -1, (), (1,)), (_C4, 1, ("w_rho",), (2,))],
    3: [(_C3, -1, ("rp_s_l",), ()), (_C4, -1, ("A", "w_rho"), ())],
    4: [(_C4, -1, ("l_rho",), ())],
}


def _term_groups():
    """{(out, U, dirs): [(P, sign, atoms)]} with dirs a sorted tuple."""
    groups = defaultdict(list)
    for out, parts in _OUT.items():
        for cterms, s0, at0, d0 in parts:
            for s1, at1, d1, U, P in cterms:
                groups[(out, U, tuple(sorted(d0 + d1)))].append((P, s0 * s1, at0 + at1))
    return dict(groups)


_GROUPS = _term_groups()
_DIRS = sorted({k[2] for k in _GROUPS})


def _atoms(r, rp, c, s, l, w):
    rho = np.sqrt(l * l + w * w)
    return {"rp_s_l": rp * s / l, "r_s_l": r * s / l, "A": (rp * c - r) / l, "B": (r * c - rp) / l,
            "w_rho": w / rho, "l_rho": l / rho}, rho


def _fields(vals, grid, omega_c):
    st = _stencils(grid)
    return np.stack([vals, _apply(st.grad[0], vals, 0) / omega_c, _apply(st.grad[1], vals, 1) / omega_c,
                     _apply(st.grad[3], vals, 3), _apply(st.grad[4], vals, 4)])


def _density_fields(vals, grid, params):
    """Fields of a density, with r and v3 derivatives taken in the Maxwellian-weighted form.

    g_r = M d_r(g/M) - (m/theta) r g and likewise in v3, so every contraction vanishes
    identically at global Maxwellians.  Test functions keep the plain stencil of _fields.
    """
    st = _stencils(grid)
    r, v = grid.axes[3][:, None], grid.axes[4][None, :]
    M = maxwellian_rv(r, v, params)
    h = vals / M
    a = params.m / params.theta
    return np.stack([vals, _apply(st.grad[0], vals, 0) / params.omega_c, _apply(st.grad[1], vals, 1) / params.omega_c,
                     M * _apply(st.grad[3], h, 3) - a * r * vals, M * _apply(st.grad[4], h, 4) - a * v * vals])


def _dir_factor(dirs, zh):
    out = np.ones(zh.shape[0])
    for d in dirs:
        out = out * zh[:, d - 1]
    return out


def fpl_flux(f: ReducedDensity, h: ReducedDensity | None, params, cfg: FplConfig = FplConfig()):
    """Reduced flux components (F_y1, F_y2, 0, F_r, F_v3) of Q(f, h); h = f by default."""
    grid = f.grid
    h = f if h is None else h
    _, _, _, dr, dv = grid.steps
    r, v = grid.axes[3], grid.axes[4]
    oc = params.omega_c
    Uf = _density_fields(f.values, grid, params)
    Ph = np.fft.fft2(_density_fields(h.values, grid, params), axes=(1, 2))
    # primed slots stacked along the last axis: (N1, N2, n3, n_r, 5 * n_v3)
    Ph = np.moveaxis(Ph, 0, -2).reshape(grid.shape[:4] + (5 * v.size,))
    w = v[:, None] - v[None, :]
    na = cfg.n_alpha

    def slab(i):
        ri = r[i]
        out = np.zeros((5,) + grid.shape[:3] + (v.size,))
        acc = {key: np.zeros(grid.shape[:3] + (v.size,), dtype=complex) for key in _GROUPS}
        for k, rk in enumerate(r):
            q = chi_quadrature(ri, rk, cfg.n_phi, na)
            sym = shift_symbols(grid, q.z / oc, cfg.interpolation) * q.weights[:, None, None]
            zh = q.z / q.l[:, None]
            mult = {d: (sym * _dir_factor(d, zh)[:, None, None]).reshape(cfg.n_phi, na, *sym.shape[1:]).sum(axis=1)
                    for d in _DIRS}
            Pk = Ph[:, :, :, k, :]
            for p in range(cfg.n_phi):
                l, c = q.l[p * na], q.cos_phi[p * na]
                s = np.sqrt(max(1.0 - c * c, 0.0))
                at, rho = _atoms(ri, rk, c, s, l, w)
                base = 2.0 * np.pi * rk * dr * dv * cfg.cs(rho)
                for key, terms in _GROUPS.items():
                    A = np.zeros((5, v.size, v.size))
                    for P, sign, atoms in terms:
                        m = sign * base
                        for a in atoms:
                            m = m * at[a]
                        A[P] += m
                    if key[0] in (0, 1):
                        A /= oc
                    # (.., 5 nv') @ (5 nv', nv)
                    acc[key] += mult[key[2]][p][:, :, None, None] * (Pk @ np.transpose(A, (0, 2, 1)).reshape(-1, v.size))
        for (o, U, _), val in acc.items():
            out[o] += Uf[U][:, :, :, i, :] * np.fft.ifft2(val, axes=(0, 1)).real
        return out

    return np.stack(parallel_map(slab, range(r.size)), axis=4)


def apply_qfpl_avg(g: ReducedDensity, params, cfg: FplConfig = FplConfig(), h: ReducedDensity | None = None):
    """Rate <Q_FPL>(g, g) on the grid; with h given, the polarized form Q(g, h)."""
    return reduced_divergence(fpl_flux(g, h, params, cfg), g.grid)


# weak form --------------------------------------------------------------------------------

def _contractions(fields, fields_p, r, rp, c, s, l, w, zh):
    """(a_i, b_i) for i = 2, 3, 4; arrays broadcast over (..., nv, nv')."""
    g_, G1, G2, R, V = (x[..., :, None] for x in fields)
    gp, G1p, G2p, Rp, Vp = (x[..., None, :] for x in fields_p)
    rho = np.sqrt(l * l + w * w)
    z1, z2 = zh
    a = [z2 * G1 - z1 * G2,
         -(rp * s / l) * R,
         (-(rp * c - r) * w / l * R + w * (z1 * G1 + z2 * G2) - l * V) / rho]
    b = [-(z2 * G1p - z1 * G2p),
         -(r * s / l) * Rp,
         ((r * c - rp) * w / l * Rp + w * (z1 * G1p + z2 * G2p) - l * Vp) / rho]
    return a, b


def _fd_fields(phi, y, x3, r, v3, oc, h=1e-2):
    """(phi, G1, G2, phi_r, phi_v3) of an analytic test function.

    Fourth-order central differences: exact for polynomials up to degree four.
    """
    y = np.asarray(y, dtype=float)

    def d(shift):
        return (8.0 * (shift(h) - shift(-h)) - (shift(2 * h) - shift(-2 * h))) / (12.0 * h)

    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    return [phi(y, x3, r, v3),
            d(lambda t: phi(y + t * e1, x3, r, v3)) / oc,
            d(lambda t: phi(y + t * e2, x3, r, v3)) / oc,
            d(lambda t: phi(y, x3, r + t, v3)),
            d(lambda t: phi(y, x3, r, v3 + t))]


def fpl_weak_form(g: ReducedDensity, phi_test, params, cfg: FplConfig = FplConfig(), return_scale: bool = False):
    """-(1/2) sum sigma w_z sum_i (g' a_i - eps_i g b_i)(a_i[phi] - eps_i b_i[phi]) on the grid.

    phi_test is "log" (phi = ln g with the positivity floor), a grid array, or a callable
    phi(y, x3, r, v3) whose gradient is taken at the exact partner guiding center.
    For "log" the partner fields use linear interpolation, which keeps g' > 0 and
    ln g' bounded; the result is then a sum of non-positive terms.
    With return_scale the sum of absolute contributions is returned as well.
    """
    grid = g.grid
    oc = params.omega_c
    _, _, _, dr, dv = grid.steps
    r, v = grid.axes[3], grid.axes[4]
    Fg = _density_fields(g.values, grid, params)
    Fg_hat = np.fft.fft2(Fg, axes=(1, 2))
    mode = "log" if isinstance(phi_test, str) and phi_test == "log" else (
        "callable" if callable(phi_test) else "grid")
    if mode == "log":
        if phi_test != "log":
            raise ValueError("string test functions must be 'log'")
    elif mode == "grid":
        Fphi = _fields(np.broadcast_to(np.asarray(phi_test, dtype=float), grid.shape), grid, oc)
        Fphi_hat = np.fft.fft2(Fphi, axes=(1, 2))
    inv = grid.invariant_coords()
    eps = EPS_SIGNS[1:]
    vol = grid.cell_volume
    w = v[:, None] - v[None, :]
    total = scale = 0.0
    for i, ri in enumerate(r):
        sl = (slice(None), slice(None), slice(None), i)
        gi = [x[sl] for x in Fg]
        if mode == "log":
            gsafe = np.maximum(gi[0], cfg.floor)
            phii = [np.log(gsafe)] + [x / gsafe for x in gi[1:]]
        elif mode == "grid":
            phii = [x[sl] for x in Fphi]
        else:
            phii = _fd_fields(phi_test, inv.y[sl], inv.x3[sl], inv.r[sl], inv.v3[sl], oc)
        for k, rk in enumerate(r):
            q = chi_quadrature(ri, rk, cfg.n_phi, cfg.n_alpha)
            syms = shift_symbols(grid, q.z / oc, "linear" if mode == "log" else cfg.interpolation)
            for n in range(q.z.shape[0]):
                l, c = q.l[n], q.cos_phi[n]
                s = np.sqrt(max(1.0 - c * c, 0.0))
                zh = q.z[n] / l
                m = syms[n][None, :, :, None, None]
                gp = list(np.fft.ifft2(Fg_hat[:, :, :, :, k, :] * m, axes=(1, 2)).real)
                if mode == "log":
                    gps = np.maximum(gp[0], cfg.floor)
                    phip = [np.log(gps)] + [x / gps for x in gp[1:]]
                elif mode == "grid":
                    phip = list(np.fft.ifft2(Fphi_hat[:, :, :, :, k, :] * m, axes=(1, 2)).real)
                else:
                    ys = inv.y[:, :, :, k, :] - q.z[n] / oc
                    phip = _fd_fields(phi_test, ys, inv.x3[:, :, :, k, :], rk, inv.v3[:, :, :, k, :], oc)
                a, b = _contractions(gi, gp, ri, rk, c, s, l, w, zh)
                ap, bp = _contractions(phii, phip, ri, rk, c, s, l, w, zh)
                sig = cfg.cs(np.sqrt(l * l + w * w))
                integrand = 0.0
                for j in range(3):
                    integrand = integrand + (gp[0][..., None, :] * a[j] - eps[j] * gi[0][..., :, None] * b[j]) \
                        * (ap[j] - eps[j] * bp[j])
                pair = 2.0 * np.pi * rk * dr * dv * q.weights[n] * sig
                term = vol[0, 0, 0, i] * integrand * pair
                total += np.sum(term)
                scale += np.sum(np.abs(term))
    if return_scale:
        return float(-0.5 * total), float(0.5 * scale)
    return float(-0.5 * total)


def fpl_weak_vs_strong_check(g: ReducedDensity, phi_test, params, cfg: FplConfig = FplConfig()) -> float:
    """|<apply_qfpl_avg(g), phi> - fpl_weak_form(g, phi)| with phi a callable on invariants."""
    inv = g.grid.invariant_coords()
    phi = np.broadcast_to(phi_test(inv.y, inv.x3, inv.r, inv.v3), g.grid.shape)
    strong = float(np.sum(apply_qfpl_avg(g, params, cfg) * phi * g.grid.cell_volume))
    return abs(strong - fpl_weak_form(g, phi_test, params, cfg))


def conserved_weights(grid: ReducedGrid, params) -> dict:
    y1, y2, _, r, v3 = grid.mesh()
    oc2 = params.omega_c**2
    return {
        "mass": np.ones_like(y1 * r * v3),
        "pz": v3 + 0 * y1 * r,
        "ekin": 0.5 * (r * r + v3 * v3) + 0 * y1,
        "larmor_y1": y1 + 0 * r * v3,
        "larmor_y2": y2 + 0 * r * v3,
        "larmor_power": y1 * y1 + y2 * y2 - r * r / oc2 + 0 * v3,
    }


def fpl_conserved_functionals(g: ReducedDensity, params) -> dict:
    """Grid integrals of g against 1, v3, |v|^2/2, y1, y2, |y|^2 - r^2/omega_c^2.

    The perpendicular momenta vanish identically for reduced densities.
    """
    out = {k: g.integrate(wt) for k, wt in conserved_weights(g.grid, params).items()}
    out["px"] = 0.0
    out["py"] = 0.0
    return out


# pointwise evaluation for analytic densities -----------------------------------------------

def _pointwise_flux(gfun, y, x3, r, v3, params, cfg, h=1e-5):
    """Flux (F_y1, F_y2, F_r, F_v3) at one point for analytic g(y, x3, r, v3)."""
    oc = params.omega_c
    rp, vp, wq = partner_rule(r, v3, cfg.n_rp, cfg.n_v3p, cfg.Rp_max, cfg.V3p_max)
    here = [np.asarray(x, dtype=float) for x in _fd_fields(gfun, np.asarray(y)[None, :], x3, r, v3, oc, h)]
    out = np.zeros(4)
    for rk in np.unique(rp):
        sel = rp == rk
        q = chi_quadrature(r, rk, cfg.n_phi, cfg.n_alpha)
        vv = vp[sel][:, None]
        ys = np.broadcast_to(np.asarray(y)[None, None, :] - q.z[None, :, :] / oc, (vv.size, q.z.shape[0], 2))
        there = _fd_fields(gfun, ys, x3, rk, vv, oc, h)
        there = [np.broadcast_to(x, ys.shape[:2]) for x in there]
        w = v3 - vv
        l = q.l[None, :]
        c = q.cos_phi[None, :]
        s = np.sqrt(np.maximum(1.0 - c * c, 0.0))
        rho = np.sqrt(l * l + w * w)
        z1, z2 = q.z[None, :, 0] / l, q.z[None, :, 1] / l
        g0, G1, G2, R, V = (x[0] for x in here)
        gp, G1p, G2p, Rp, Vp = there
        a2, b2 = z2 * G1 - z1 * G2, -(z2 * G1p - z1 * G2p)
        a3, b3 = -(rk * s / l) * R, -(r * s / l) * Rp
        a4 = (-(rk * c - r) * w / l * R + w * (z1 * G1 + z2 * G2) - l * V) / rho
        b4 = ((r * c - rk) * w / l * Rp + w * (z1 * G1p + z2 * G2p) - l * Vp) / rho
        c2, c3, c4 = gp * a2 + g0 * b2, gp * a3 - g0 * b3, gp * a4 - g0 * b4
        wt = 2.0 * np.pi * wq[sel][:, None] * q.weights[None, :] * cfg.cs(rho)
        out[0] += np.sum(wt * (z2 * c2 + (w / rho) * z1 * c4)) / oc
        out[1] += np.sum(wt * (-z1 * c2 + (w / rho) * z2 * c4)) / oc
        out[2] += np.sum(wt * (-(rk * s / l) * c3 - (rk * c - r) * w / (l * rho) * c4))
        out[3] += np.sum(wt * (-(l / rho) * c4))
    return out


def qfpl_pointwise(gfun, nodes: InvariantCoords, params, cfg: FplConfig = FplConfig(), step: float = 1e-3):
    """<Q_FPL>(g, g) at nodes for analytic g: the reduced divergence of the pointwise flux."""
    y = np.asarray(nodes.y, dtype=float).reshape(-1, 2)
    shape = np.shape(nodes.r)
    x3 = np.broadcast_to(nodes.x3, shape).ravel()
    r = np.asarray(nodes.r, dtype=float).ravel()
    v3 = np.broadcast_to(nodes.v3, shape).ravel()
    out = np.zeros(r.size)
    hh = step
    for n in range(r.size):
        F = lambda yy, rr, vv: _pointwise_flux(gfun, yy, x3[n], rr, vv, params, cfg)  # noqa: E731
        e1, e2 = np.array([hh, 0.0]), np.array([0.0, hh])
        div = (F(y[n] + e1, r[n], v3[n])[0] - F(y[n] - e1, r[n], v3[n])[0]) / (2 * hh)
        div += (F(y[n] + e2, r[n], v3[n])[1] - F(y[n] - e2, r[n], v3[n])[1]) / (2 * hh)
        rp, rm = r[n] + hh, r[n] - hh
        div += (rp * F(y[n], rp, v3[n])[2] - rm * F(y[n], rm, v3[n])[2]) / (2 * hh * r[n])
        div += (F(y[n], r[n], v3[n] + hh)[3] - F(y[n], r[n], v3[n] - hh)[3]) / (2 * hh)
        out[n] = div
    return out.reshape(shape)


# full-coordinate oracle ---------------------------------------------------------------------

def _velocity_hessian(f, x_perp, x3, v, h=2e-4):
    """Hessian of f(x, .) at velocities v (N, 3) by central differences."""
    N = v.shape[0]
    xp = np.broadcast_to(x_perp, (N, 2))
    x3a = np.full(N, x3)

    def fv(vv):
        return f(PhasePoint(xp, x3a, vv[:, :2], vv[:, 2]))

    H = np.zeros((N, 3, 3))
    f0 = fv(v)
    E = np.eye(3) * h
    for a in range(3):
        H[:, a, a] = (fv(v + E[a]) - 2 * f0 + fv(v - E[a])) / (h * h)
        for b in range(a + 1, 3):
            H[:, a, b] = H[:, b, a] = (fv(v + E[a] + E[b]) - fv(v + E[a] - E[b]) - fv(v - E[a] + E[b])
                                       + fv(v - E[a] - E[b])) / (4 * h * h)
    return f0, H


def qfpl_oracle(f, p: PhasePoint, params, cs, cfg: GyroQuadratureConfig = GyroQuadratureConfig(),
                vq: VelocityQuadrature = VelocityQuadrature()):
    """Gyroaverage of the full Landau operator at phase points p, by nested quadrature.

    Moving the v-derivatives onto f under the convolution gives
    Q(f, f)(v) = int sigma(|u|) S(u) : [f(v - u) H(v) - f(v) H(v - u)] du, H = Hess_v f.
    """
    batch = np.shape(p.x3)
    xs = p.x_perp.reshape(-1, 2)
    x3s = p.x3.reshape(-1)
    vs = np.concatenate([p.v_perp.reshape(-1, 2), p.v3.reshape(-1, 1)], axis=1)
    out = np.zeros(x3s.size)
    for k in range(x3s.size):
        pk = PhasePoint(xs[k], x3s[k], vs[k, :2], vs[k, 2])
        circ = _circle(pk, params, cfg)
        acc = 0.0
        for a in range(cfg.n_alpha):
            v = circ.velocity[a]
            vp, wv = vq.nodes(v)
            u = v[None, :] - vp
            SS = _projector(u) * cs(np.linalg.norm(u, axis=1))[:, None, None]
            fq, Hq = _velocity_hessian(f, circ.x_perp[a], circ.x3[a], vp)
            f0, H0 = _velocity_hessian(f, circ.x_perp[a], circ.x3[a], v[None, :])
            acc += np.sum(wv * (fq * np.einsum("nij,ij->n", SS, H0[0]) - f0[0] * np.einsum("nij,nij->n", SS, Hq)))
        out[k] = acc / cfg.n_alpha
    return out.reshape(batch)


__all__ = [
    "FplConfig", "apply_qfpl_avg", "fpl_flux", "fpl_weak_form", "fpl_weak_vs_strong_check",
    "fpl_conserved_functionals", "conserved_weights", "qfpl_pointwise", "qfpl_oracle",
]
