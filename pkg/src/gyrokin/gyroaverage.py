"""Gyroaverage along the Larmor circle and nested-quadrature oracles.

The oracles here never use any closed-form averaged kernel.  They integrate the
full-coordinate operators directly, so they are the reference the closed forms
are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Gyrophase, InvariantCoords, PhasePoint, from_invariants, perp, to_invariants

TENSOR_VARIANTS = ("S", "v", "perp_v", "v_p", "perp_v_p")
# pairs (w1, w2) contracted with S in the six scalar averages
SCALAR_VARIANTS = {
    "sca1": ("v", "v"),
    "sca2": ("v", "perp_v"),
    "sca3": ("perp_v", "perp_v"),
    "sca4": ("v_p", "v"),
    "sca5": ("v_p", "perp_v"),
    "sca6": ("perp_v_p", "perp_v"),
}


@dataclass(frozen=True)
class GyroQuadratureConfig:
    n_alpha: int = 32

    def __post_init__(self):
        if self.n_alpha < 4:
            raise ValueError("n_alpha must be >= 4")

    @property
    def alphas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_alpha) / self.n_alpha


VELOCITY_SCHEMES = ("spherical", "box")


@dataclass(frozen=True)
class VelocityQuadrature:
    """Inner velocity rule.

    "spherical": v' = v - rho omega with Gauss-Legendre in rho (weight rho^2) on
    [0, L_v + |v|], Gauss-Legendre in cos(theta) and trapezoid in azimuth.  Centring at v
    absorbs the point singularity of sigma S(v - v').
    "box": tensor Gauss-Legendre on [-L_v, L_v]^3.
    """

    L_v: float = 8.0
    n: int = 24
    scheme: str = "spherical"

    def __post_init__(self):
        if self.L_v <= 0 or self.n < 2:
            raise ValueError("need L_v > 0 and n >= 2")
        if self.scheme not in VELOCITY_SCHEMES:
            raise ValueError(f"scheme must be one of {VELOCITY_SCHEMES}")

    def nodes(self, v=None):
        """Nodes v' (N, 3) and weights; spherical rules need the centre v (3,)."""
        if self.scheme == "box":
            return _box_rule(self.L_v, self.n)
        v = np.asarray(v, dtype=float)
        d, w = _sphere_rule(self.L_v + float(np.linalg.norm(v)), self.n)
        return v[None, :] - d, w


@lru_cache(maxsize=16)
def _box_rule(L, n):
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = L * x, L * w
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    X.flags.writeable = False
    W.flags.writeable = False
    return X, W


@lru_cache(maxsize=256)
def _sphere_rule(R, n):
    xr, wr = np.polynomial.legendre.leggauss(n)
    rho, wr = 0.5 * R * (xr + 1.0), 0.5 * R * wr
    n_th, n_az = n // 2 + 4, n
    ct, wt = np.polynomial.legendre.leggauss(n_th)
    az = 2.0 * np.pi * np.arange(n_az) / n_az
    st = np.sqrt(1.0 - ct**2)
    om = np.stack([st[:, None] * np.cos(az)[None], st[:, None] * np.sin(az)[None],
                   np.broadcast_to(ct[:, None], (n_th, n_az))], axis=-1).reshape(-1, 3)
    wom = np.repeat(wt * 2.0 * np.pi / n_az, n_az)
    d = (rho[:, None, None] * om[None]).reshape(-1, 3)
    w = ((wr * rho**2)[:, None] * wom[None]).ravel()
    return d, w


def _circle(p: PhasePoint, params, cfg: GyroQuadratureConfig) -> PhasePoint:
    """Phase points on the Larmor circle of p, shape batch + (n_alpha,)."""
    inv, _ = to_invariants(p, params.omega_c)
    a = cfg.alphas
    inv_b = InvariantCoords(inv.y[..., None, :], inv.x3[..., None], inv.r[..., None], inv.v3[..., None])
    return from_invariants(inv_b, Gyrophase(a), params.omega_c)


def gyroaverage_scalar(u, p: PhasePoint, params, cfg: GyroQuadratureConfig = GyroQuadratureConfig()):
    """Trapezoid average of u over the gyrophase; u may return trailing axes."""
    circ = _circle(p, params, cfg)
    vals = np.asarray(u(circ), dtype=float)
    return vals.mean(axis=np.ndim(p.x3))


def gyroaverage_integral_operator(C, f, p: PhasePoint, params, cfg=GyroQuadratureConfig(),
                                  vq: VelocityQuadrature = VelocityQuadrature()):
    """<int C(v, v') f(x, v') dv'> by outer trapezoid and an inner velocity rule.

    C(v, vp) takes broadcastable (..., 3) arrays and may return trailing axes.
    f is a callable on PhasePoint.  p may be a batch of points.
    """
    batch = np.shape(p.x3)
    flat = PhasePoint(p.x_perp.reshape(-1, 2), p.x3.reshape(-1), p.v_perp.reshape(-1, 2), p.v3.reshape(-1))
    out = []
    for k in range(flat.x3.shape[0]):
        pk = PhasePoint(flat.x_perp[k], flat.x3[k], flat.v_perp[k], flat.v3[k])
        circ = _circle(pk, params, cfg)
        acc = 0.0
        for a in range(cfg.n_alpha):
            v = circ.velocity[a]
            vp, wv = vq.nodes(v)
            nq = vp.shape[0]
            fq = f(PhasePoint(np.broadcast_to(circ.x_perp[a], (nq, 2)), np.full(nq, circ.x3[a]),
                              vp[:, :2], vp[:, 2]))
            cq = np.asarray(C(v[None, :], vp), dtype=float)
            acc = acc + np.tensordot(fq * wv, cq, axes=(0, 0))
        out.append(acc / cfg.n_alpha)
    out = np.array(out)
    return out.reshape(batch + out.shape[1:])


def _w(name, v, vp):
    """Weight vectors (v_perp,0), (perp v_perp,0) and their primed versions."""
    src = v if name in ("v", "perp_v") else vp
    src = np.broadcast_to(src, np.broadcast_shapes(v.shape, vp.shape))
    w = np.zeros(src.shape)
    w[..., :2] = perp(src[..., :2]) if name.startswith("perp") else src[..., :2]
    return w


def _projector(d):
    d2 = np.sum(d * d, axis=-1)[..., None, None]
    eye = np.eye(3)
    with np.errstate(invalid="ignore", divide="ignore"):
        S = eye - d[..., :, None] * d[..., None, :] / d2
    return np.where(d2 > 0, S, 0.0)


def gyroaverage_tensor_oracle(f, variant: str, p: PhasePoint, params, cs,
                              cfg=GyroQuadratureConfig(), vq: VelocityQuadrature = VelocityQuadrature()):
    """Nested-quadrature value of <f>_{sigma S}, <f, w1>_{sigma S} or <f, w1, w2>_{sigma S}."""
    if variant not in TENSOR_VARIANTS and variant not in SCALAR_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")

    def C(v, vp):
        d = v - vp
        s = np.sqrt(np.sum(d * d, axis=-1))
        S = _projector(d) * cs(s)[..., None, None]
        if variant == "S":
            return S
        if variant in TENSOR_VARIANTS:
            return np.einsum("...ij,...j->...i", S, _w(variant, v, vp))
        a, b = SCALAR_VARIANTS[variant]
        return np.einsum("...ij,...i,...j->...", S, _w(a, v, vp), _w(b, v, vp))

    return gyroaverage_integral_operator(C, f, p, params, cfg, vq)
