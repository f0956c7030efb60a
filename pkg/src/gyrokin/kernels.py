"""Closed-form averaged kernels and the desingularized chi quadrature.

A kernel point is (r, v3, r', v3', z) with z = omega_c y - omega_c y'.  Every
routine broadcasts over leading axes.  Six-vectors use omega_c x units in the
position slots, so they pair with grad_{omega_c x, v}.

Notation used below for unit directions u = v_perp/r, u' = v_perp'/r':
    P = ((u, 0), (perp u, 0))      Q = ((perp u, 0), (-u, 0))
    K = ((perp z/|z|, 0), 0)       W = (w (z/|z|, 0), -|z| e3) / rho
with w = v3 - v3' and rho^2 = |z|^2 + w^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import perp, rotate

EPS_SIGNS = np.array([-1.0, -1.0, 1.0, 1.0])


class KernelDomainError(ValueError):
    """Input outside the support of chi or a degenerate relative velocity."""


@dataclass(frozen=True)
class KernelPoint:
    r: np.ndarray
    v3: np.ndarray
    r_p: np.ndarray
    v3_p: np.ndarray
    z: np.ndarray

    @classmethod
    def make(cls, r, v3, r_p, v3_p, z) -> "KernelPoint":
        """Broadcast all entries to one common shape (z gets a trailing axis of 2)."""
        z = np.asarray(z, dtype=float)
        scal = [np.asarray(a, dtype=float) for a in (r, v3, r_p, v3_p)]
        shape = np.broadcast_shapes(z.shape[:-1], *(a.shape for a in scal))
        scal = [np.broadcast_to(a, shape) for a in scal]
        return cls(*scal, np.broadcast_to(z, shape + (2,)))

    @property
    def z_norm(self):
        return np.hypot(self.z[..., 0], self.z[..., 1])

    def swapped(self) -> "KernelPoint":
        return KernelPoint(self.r_p, self.v3_p, self.r, self.v3, -self.z)


def chi(r, r_p, z_norm):
    r, r_p, z_norm = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, r_p, z_norm)))
    lo, hi = np.abs(r - r_p), r + r_p
    inside = (z_norm > lo) & (z_norm < hi)
    zz = z_norm * z_norm
    with np.errstate(invalid="ignore", divide="ignore"):
        val = 1.0 / (np.pi**2 * np.sqrt((zz - lo * lo) * (hi * hi - zz)))
    return np.where(inside, val, 0.0)


def _check_support(r, r_p, z_norm):
    if np.any(~((z_norm > np.abs(r - r_p)) & (z_norm < r + r_p))) or np.any(r <= 0) or np.any(r_p <= 0):
        raise KernelDomainError("point outside the open support |r - r'| < |z| < r + r'")


def cos_phi(r, r_p, z_norm):
    return np.clip((r * r + r_p * r_p - z_norm * z_norm) / (2.0 * r * r_p), -1.0, 1.0)


def phi_angle(r, r_p, z_norm):
    r, r_p, z_norm = (np.asarray(a, dtype=float) for a in (r, r_p, z_norm))
    _check_support(r, r_p, z_norm)
    return np.arccos(cos_phi(r, r_p, z_norm))


def psi_angle(r, r_p, z_norm):
    """Angle with r'^2 = r^2 + |z|^2 + 2 r |z| cos psi."""
    r, r_p, z_norm = (np.asarray(a, dtype=float) for a in (r, r_p, z_norm))
    _check_support(r, r_p, z_norm)
    c = (r_p * r_p - r * r - z_norm * z_norm) / (2.0 * r * z_norm)
    return np.arccos(np.clip(c, -1.0, 1.0))


def avg_sigma(kp: KernelPoint, cs):
    zn = kp.z_norm
    return cs(np.sqrt(zn * zn + (kp.v3 - kp.v3_p) ** 2)) * chi(kp.r, kp.r_p, zn)


def scatter_matrix(w):
    w = np.asarray(w, dtype=float)
    n2 = np.sum(w * w, axis=-1)
    if np.any(n2 == 0):
        raise KernelDomainError("S(w) undefined for w = 0")
    return np.eye(3) - w[..., :, None] * w[..., None, :] / n2[..., None, None]


def _geometry(kp: KernelPoint):
    zn = kp.z_norm
    w = kp.v3 - kp.v3_p
    if np.any((zn == 0) & (w == 0)):
        raise KernelDomainError("degenerate relative velocity: z = 0 and v3 = v3'")
    c = cos_phi(kp.r, kp.r_p, zn)
    s = np.sqrt(np.maximum(1.0 - c * c, 0.0))
    return zn, w, zn * zn + w * w, c, s


def _weight(kp, cs, with_chi):
    zn = kp.z_norm
    sig = cs(np.sqrt(zn * zn + (kp.v3 - kp.v3_p) ** 2))
    return sig * chi(kp.r, kp.r_p, zn) if with_chi else sig


def avg_projection_tensor(kp: KernelPoint, cs, with_chi: bool = True):
    """sigma chi S((perp z, v3' - v3))."""
    d = np.concatenate([perp(kp.z), (kp.v3_p - kp.v3)[..., None]], axis=-1)
    return _weight(kp, cs, with_chi)[..., None, None] * scatter_matrix(d)


def avg_vector_kernels(kp: KernelPoint, cs, with_chi: bool = True):
    """Integrands of <f,(v,0)>, <f,(v',0)>, <f,(perp v,0)>, <f,(perp v',0)>; shape (..., 4, 3)."""
    zn, w, rho2, c, _ = _geometry(kp)
    r, rp = kp.r, kp.r_p
    sig = _weight(kp, cs, with_chi)
    a = np.concatenate([(w * w / (zn * zn))[..., None] * perp(kp.z), w[..., None]], axis=-1)
    b = np.concatenate([kp.z, np.zeros(zn.shape + (1,))], axis=-1)
    k1 = -((r * r - r * rp * c) / rho2)[..., None] * a
    k2 = ((rp * rp - r * rp * c) / rho2)[..., None] * a
    k3 = ((r * r - r * rp * c) / (zn * zn))[..., None] * b
    k4 = -((rp * rp - r * rp * c) / (zn * zn))[..., None] * b
    return sig[..., None, None] * np.stack([k1, k2, k3, k4], axis=-2)


def scalar_contractions(kp: KernelPoint, cs, with_chi: bool = True):
    """The six brace contents times sigma chi; shape (..., 6)."""
    zn, w, rho2, c, s = _geometry(kp)
    r, rp = kp.r, kp.r_p
    sig = _weight(kp, cs, with_chi)
    zero = np.zeros(np.broadcast_shapes(zn.shape, r.shape, rp.shape))
    k1 = r * r - r * r * (r - rp * c) ** 2 / rho2
    k3 = r * r - r * r * rp * rp * s * s / rho2
    k4 = r * rp * c - r * rp * (r * c - rp) * (r - rp * c) / rho2
    k6 = r * rp * c - r * r * rp * rp * s * s / rho2
    return sig[..., None] * np.stack(np.broadcast_arrays(k1, zero, k3, k4, zero, k6), axis=-1)


def _six(x_perp=None, x3=None, v_perp=None, v3=None, shape=()):
    out = np.zeros(shape + (6,))
    if x_perp is not None:
        out[..., 0:2] = x_perp
    if x3 is not None:
        out[..., 2] = x3
    if v_perp is not None:
        out[..., 3:5] = v_perp
    if v3 is not None:
        out[..., 5] = v3
    return out


def _basis(kp: KernelPoint, u, u_p):
    """The vectors P, Q, P', Q', K, W."""
    zn, w, rho2, c, s = _geometry(kp)
    shape = np.broadcast_shapes(zn.shape, np.shape(u)[:-1], np.shape(u_p)[:-1], np.shape(kp.r), np.shape(kp.r_p))
    rho = np.sqrt(rho2)
    zhat = kp.z / zn[..., None]
    P = _six(x_perp=u, v_perp=perp(u), shape=shape)
    Q = _six(x_perp=perp(u), v_perp=-u, shape=shape)
    Pp = _six(x_perp=u_p, v_perp=perp(u_p), shape=shape)
    Qp = _six(x_perp=perp(u_p), v_perp=-u_p, shape=shape)
    K = _six(x_perp=perp(zhat), shape=shape)
    W = _six(x_perp=(w / rho)[..., None] * zhat, v3=-zn / rho, shape=shape)
    return P, Q, Pp, Qp, K, W, (zn, w, rho, c, s)


def eta_fields(kp: KernelPoint, u, u_p):
    """xi^i / sqrt(sigma chi) and the swapped xi^i' / sqrt(sigma chi); each (..., 4, 6)."""
    P, Q, Pp, Qp, K, W, (zn, w, rho, c, s) = _basis(kp, u, u_p)
    r, rp = kp.r, kp.r_p
    col = lambda a: np.asarray(a)[..., None]  # noqa: E731
    e1 = col(rp * s * w / (zn * rho)) * P
    e2 = col((r - rp * c) / zn) * P + K
    e3 = col(rp * s / zn) * Q
    e4 = col((rp * c - r) * w / (zn * rho)) * Q + W
    f1 = col(r * s * (-w) / (zn * rho)) * Pp
    f2 = col((rp - r * c) / zn) * Pp - K
    f3 = col(r * s / zn) * Qp
    f4 = col((r * c - rp) * (-w) / (zn * rho)) * Qp + W
    return np.stack([e1, e2, e3, e4], axis=-2), np.stack([f1, f2, f3, f4], axis=-2)


def _unit(v_perp):
    v_perp = np.asarray(v_perp, dtype=float)
    r = np.hypot(v_perp[..., 0], v_perp[..., 1])
    if np.any(r == 0):
        raise KernelDomainError("r must be positive")
    return v_perp / r[..., None], r


def xi_fields(xbar, v, xbar_p, v_p, params, cs):
    """The four fields xi^i(xbar, v, xbar', v'), each carrying sqrt(sigma chi); shape (..., 4, 6)."""
    v, v_p = np.asarray(v, dtype=float), np.asarray(v_p, dtype=float)
    u, r = _unit(v[..., :2])
    u_p, r_p = _unit(v_p[..., :2])
    oc = params.omega_c
    z = oc * (np.asarray(xbar) - np.asarray(xbar_p)) + perp(v[..., :2]) - perp(v_p[..., :2])
    kp = KernelPoint(r, v[..., 2], r_p, v_p[..., 2], z)
    _check_support(r, r_p, kp.z_norm)
    eta, _ = eta_fields(kp, u, u_p)
    return np.sqrt(avg_sigma(kp, cs))[..., None, None] * eta


def _dirs(alpha, alpha_p):
    return (np.stack([np.cos(alpha), np.sin(alpha)], axis=-1),
            np.stack([np.cos(alpha_p), np.sin(alpha_p)], axis=-1))


def a_plus(kp: KernelPoint, alpha, alpha_p, cs):
    """A+ from the fields: sigma chi A+ = sum_i xi^i (x) xi^i.  Returned without the sigma chi factor."""
    _check_support(kp.r, kp.r_p, kp.z_norm)
    eta, _ = eta_fields(kp, *_dirs(alpha, alpha_p))
    return np.einsum("...ia,...ib->...ab", eta, eta)


def a_minus(kp: KernelPoint, alpha, alpha_p, cs):
    """A- from the fields: sigma chi A- = sum_i eps_i xi^i (x) xi^i'."""
    _check_support(kp.r, kp.r_p, kp.z_norm)
    eta, etap = eta_fields(kp, *_dirs(alpha, alpha_p))
    return np.einsum("i,...ia,...ib->...ab", EPS_SIGNS, eta, etap)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def a_plus_four_term(kp: KernelPoint, alpha, alpha_p):
    """Direct four-term sum for A+ (rank-one squares)."""
    P, Q, _, _, K, W, (zn, w, rho, c, s) = _basis(kp, *_dirs(alpha, alpha_p))
    r, rp = kp.r, kp.r_p
    sc = lambda a: np.asarray(a)[..., None, None]  # noqa: E731
    col = lambda a: np.asarray(a)[..., None]  # noqa: E731
    t2 = col((r - rp * c) / zn) * P + K
    t4 = col((rp * c - r) * w / (zn * rho)) * Q + W
    return (sc(rp**2 * s**2 * w**2 / (zn**2 * rho**2)) * _outer(P, P) + _outer(t2, t2)
            + sc(rp**2 * s**2 / zn**2) * _outer(Q, Q) + _outer(t4, t4))


def a_minus_four_term(kp: KernelPoint, alpha, alpha_p):
    """Direct four-term sum of cross products for A-."""
    P, Q, Pp, Qp, K, W, (zn, w, rho, c, s) = _basis(kp, *_dirs(alpha, alpha_p))
    r, rp = kp.r, kp.r_p
    sc = lambda a: np.asarray(a)[..., None, None]  # noqa: E731
    col = lambda a: np.asarray(a)[..., None]  # noqa: E731
    a2 = col((r - rp * c) / zn) * P + K
    b2 = col((r * c - rp) / zn) * Pp + K
    a4 = col((rp * c - r) * w / (zn * rho)) * Q + W
    b4 = col((rp - r * c) * w / (zn * rho)) * Qp + W
    return (sc(r * rp * s**2 * w**2 / (zn**2 * rho**2)) * _outer(P, Pp) + _outer(a2, b2)
            + sc(r * rp * s**2 / zn**2) * _outer(Q, Qp) + _outer(a4, b4))


_E = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_E33 = np.diag([0.0, 0.0, 1.0])


def _block_b(kp: KernelPoint):
    """Block matrix built from S((perp z, v3' - v3)) and E."""
    d = np.concatenate([perp(kp.z), (kp.v3_p - kp.v3)[..., None]], axis=-1)
    S = scatter_matrix(d)
    out = np.zeros(S.shape[:-2] + (6, 6))
    out[..., :3, :3] = _E.T @ S @ _E
    out[..., :3, 3:] = _E @ S @ _E33
    out[..., 3:, :3] = -_E33 @ S @ _E
    out[..., 3:, 3:] = _E33 @ S @ _E33
    return out


def a_plus_seven_term(kp: KernelPoint, alpha, alpha_p):
    """A+ as A1+ ... A6+ plus the projector block, an independent closed form."""
    P, Q, _, _, K, W, (zn, w, rho, c, s) = _basis(kp, *_dirs(alpha, alpha_p))
    r, rp = kp.r, kp.r_p
    sc = lambda a: np.asarray(a)[..., None, None]  # noqa: E731
    g = (r - rp * c) * w / (zn * rho)
    return (sc(1 - rp**2 * s**2 / rho**2) * _outer(P, P)
            + sc(1 - (r - rp * c) ** 2 / rho**2) * _outer(Q, Q)
            + sc((r - rp * c) / zn) * (_outer(K, P) + _outer(P, K))
            - sc(g) * (_outer(W, Q) + _outer(Q, W))
            + _block_b(kp))


def a_minus_seven_term(kp: KernelPoint, alpha, alpha_p):
    """A- as A1- ... A6- plus the projector block."""
    P, Q, Pp, Qp, K, W, (zn, w, rho, c, s) = _basis(kp, *_dirs(alpha, alpha_p))
    r, rp = kp.r, kp.r_p
    sc = lambda a: np.asarray(a)[..., None, None]  # noqa: E731
    return (sc(c - r * rp * s**2 / rho**2) * _outer(P, Pp)
            + sc(c + (r - rp * c) * (rp - r * c) / rho**2) * _outer(Q, Qp)
            - sc((rp - r * c) / zn) * _outer(K, Pp)
            + sc((r - rp * c) / zn) * _outer(P, K)
            + sc((rp - r * c) * w / (zn * rho)) * _outer(W, Qp)
            - sc((r - rp * c) * w / (zn * rho)) * _outer(Q, W)
            + _block_b(kp))


@dataclass(frozen=True)
class ChiQuadrature:
    phi: np.ndarray
    alpha: np.ndarray
    z: np.ndarray  # (n_phi * n_alpha, 2)
    l: np.ndarray  # |z| per node
    cos_phi: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=64)
def _phi_rule(n_phi):
    x, w = np.polynomial.legendre.leggauss(n_phi)
    return 0.5 * np.pi * (x + 1.0), 0.5 * np.pi * w


def chi_quadrature(r, r_p, n_phi: int = 8, n_alpha: int = 16) -> ChiQuadrature:
    """Nodes z = l(phi) e^{i alpha} and weights with sum F(z) w ~ int F(z) chi dz."""
    if not (r > 0 and r_p > 0):
        raise KernelDomainError("chi quadrature needs r, r' > 0")
    if n_phi < 2 or n_alpha < 4:
        raise ValueError("need n_phi >= 2 and n_alpha >= 4")
    ph, wph = _phi_rule(n_phi)
    al = 2.0 * np.pi * np.arange(n_alpha) / n_alpha
    l = np.sqrt(np.maximum(r * r + r_p * r_p - 2.0 * r * r_p * np.cos(ph), 0.0))
    z = (l[:, None, None] * np.stack([np.cos(al), np.sin(al)], axis=-1)[None]).reshape(-1, 2)
    w = (wph[:, None] / (2.0 * np.pi**2) * (2.0 * np.pi / n_alpha) * np.ones(n_alpha)[None]).ravel()
    return ChiQuadrature(ph, al, z, np.repeat(l, n_alpha), np.repeat(np.cos(ph), n_alpha), w)


def rotate_kernel_point(kp: KernelPoint, angle) -> KernelPoint:
    return KernelPoint(kp.r, kp.v3, kp.r_p, kp.v3_p, rotate(angle, kp.z))


KERNEL_VARIANTS = ("S", "v", "v_p", "perp_v", "perp_v_p", "sca1", "sca2", "sca3", "sca4", "sca5", "sca6")


def closed_form_kernel(variant: str, kp: KernelPoint, cs, with_chi: bool = True):
    """Closed-form averaged kernel selected by oracle variant name."""
    if variant == "S":
        return avg_projection_tensor(kp, cs, with_chi)
    if variant in ("v", "v_p", "perp_v", "perp_v_p"):
        return avg_vector_kernels(kp, cs, with_chi)[..., ("v", "v_p", "perp_v", "perp_v_p").index(variant), :]
    if variant in KERNEL_VARIANTS:
        return scalar_contractions(kp, cs, with_chi)[..., int(variant[3:]) - 1]
    raise ValueError(f"unknown kernel variant {variant!r}")


def averaged_kernel_operator(variant: str, g, y, x3, r, v3, params, cs, n_phi: int = 24, n_alpha: int = 32,
                             n_rp: int = 32, n_v3p: int = 32, R_max: float = 8.0, V_max: float = 8.0):
    """2 pi int r' dr' dv3' int K(r, v3, r', v3', z) g(y - z/omega_c, x3, r', v3') dz at one node.

    The chi factor is carried by the quadrature weights, so K is evaluated without it.
    """
    from .quadrature import partner_rule

    oc = params.omega_c
    y = np.asarray(y, dtype=float)
    RP, VP, W = partner_rule(r, v3, n_rp, n_v3p, R_max, V_max)
    total = 0.0
    for rp in np.unique(RP):
        sel = RP == rp
        q = chi_quadrature(r, rp, n_phi, n_alpha)
        vp = VP[sel]
        kp = KernelPoint.make(r, v3, rp, vp[:, None], q.z[None, :, :])
        K = closed_form_kernel(variant, kp, cs, with_chi=False)
        gp = g(y[None, None, :] - q.z[None, :, :] / oc, x3, rp, vp[:, None])
        wt = W[sel][:, None] * q.weights[None, :] * gp
        total = total + 2.0 * np.pi * np.tensordot(wt, K, axes=([0, 1], [0, 1]))
    return total
