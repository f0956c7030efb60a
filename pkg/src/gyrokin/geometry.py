"""Exact cyclotron flow, its invariants and the commuting fields b^i.

Phase points are stored as arrays so every routine vectorizes over leading
axes.  Six-vectors are ordered (x1, x2, x3, v1, v2, v3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


class DegenerateGyrationError(ValueError):
    """Raised when an operation needs r = |v_perp| > 0."""


@dataclass(frozen=True)
class PhasePoint:
    x_perp: np.ndarray
    x3: np.ndarray
    v_perp: np.ndarray
    v3: np.ndarray

    @classmethod
    def make(cls, x_perp, x3, v_perp, v3) -> "PhasePoint":
        return cls(
            np.asarray(x_perp, dtype=float),
            np.asarray(x3, dtype=float),
            np.asarray(v_perp, dtype=float),
            np.asarray(v3, dtype=float),
        )

    def as_array(self) -> np.ndarray:
        """Stack into (..., 6)."""
        return np.concatenate(
            [self.x_perp, self.x3[..., None], self.v_perp, self.v3[..., None]], axis=-1
        )

    @classmethod
    def from_array(cls, a) -> "PhasePoint":
        a = np.asarray(a, dtype=float)
        return cls(a[..., 0:2], a[..., 2], a[..., 3:5], a[..., 5])

    @property
    def velocity(self) -> np.ndarray:
        return np.concatenate([self.v_perp, self.v3[..., None]], axis=-1)


@dataclass(frozen=True)
class InvariantCoords:
    y: np.ndarray
    x3: np.ndarray
    r: np.ndarray
    v3: np.ndarray


@dataclass(frozen=True)
class Gyrophase:
    alpha: np.ndarray

    def psi0(self, omega_c: float):
        return -np.asarray(self.alpha) / omega_c


def _check_omega(omega_c: float) -> None:
    if omega_c == 0 or not np.isfinite(omega_c):
        raise ValueError("omega_c must be finite and nonzero")


def perp(w):
    """Return the rotated vector (w2, -w1)."""
    w = np.asarray(w, dtype=float)
    return np.stack([w[..., 1], -w[..., 0]], axis=-1)


def rotate(alpha, w):
    """R(alpha) w with R = [[cos, -sin], [sin, cos]]."""
    w = np.asarray(w, dtype=float)
    c, s = np.cos(alpha), np.sin(alpha)
    return np.stack([c * w[..., 0] - s * w[..., 1], s * w[..., 0] + c * w[..., 1]], axis=-1)


def wrap_angle(alpha):
    a = np.mod(alpha, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    return np.where(a >= TWO_PI, 0.0, a)


def flow(s, p: PhasePoint, omega_c: float) -> PhasePoint:
    """Exact solution of the fast cyclotron transport at time s."""
    _check_omega(omega_c)
    s = np.asarray(s, dtype=float)
    v_new = rotate(-omega_c * s, p.v_perp)
    x_new = p.x_perp + perp(p.v_perp) / omega_c - perp(v_new) / omega_c
    shape = np.broadcast_shapes(np.shape(p.x3), s.shape)
    return PhasePoint(
        x_new, np.broadcast_to(p.x3, shape).copy(), v_new, np.broadcast_to(p.v3, shape).copy()
    )


def to_invariants(p: PhasePoint, omega_c: float) -> tuple[InvariantCoords, Gyrophase]:
    _check_omega(omega_c)
    y = p.x_perp + perp(p.v_perp) / omega_c
    r = np.hypot(p.v_perp[..., 0], p.v_perp[..., 1])
    alpha = np.where(r > 0, wrap_angle(np.arctan2(p.v_perp[..., 1], p.v_perp[..., 0])), 0.0)
    return InvariantCoords(y, np.array(p.x3, dtype=float), r, np.array(p.v3, dtype=float)), Gyrophase(alpha)


def from_invariants(inv: InvariantCoords, g: Gyrophase, omega_c: float) -> PhasePoint:
    _check_omega(omega_c)
    r = np.asarray(inv.r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    alpha = np.asarray(g.alpha, dtype=float)
    y = np.asarray(inv.y, dtype=float)
    shape = np.broadcast_shapes(r.shape, alpha.shape, y.shape[:-1], np.shape(inv.x3), np.shape(inv.v3))
    r, alpha = np.broadcast_to(r, shape), np.broadcast_to(alpha, shape)
    v = np.stack([r * np.cos(alpha), r * np.sin(alpha)], axis=-1)
    x = y - perp(v) / omega_c
    x3 = np.broadcast_to(np.asarray(inv.x3, dtype=float), shape).copy()
    v3 = np.broadcast_to(np.asarray(inv.v3, dtype=float), shape).copy()
    return PhasePoint(x, x3, v, v3)


def psi(i: int, p: PhasePoint, omega_c: float):
    """Value of the invariant psi_i (psi_0 = -alpha/omega_c with alpha in [0, 2pi))."""
    inv, g = to_invariants(p, omega_c)
    if i == 0:
        return -g.alpha / omega_c
    return [None, inv.y[..., 0], inv.y[..., 1], inv.x3, inv.r, inv.v3][i]


def _radius(p: PhasePoint):
    r = np.hypot(p.v_perp[..., 0], p.v_perp[..., 1])
    if np.any(r == 0):
        raise DegenerateGyrationError("operation undefined at r = 0")
    return r


def b_field(i: int, p: PhasePoint, omega_c: float) -> np.ndarray:
    """Coefficient 6-vector of the derivation b^i . grad_{x,v}."""
    _check_omega(omega_c)
    shape = np.shape(p.x3)
    out = np.zeros(shape + (6,))
    v = p.v_perp
    if i == 0:
        out[..., 0:2] = v
        out[..., 3:5] = omega_c * perp(v)
    elif i in (1, 2, 3):
        out[..., i - 1] = 1.0
    elif i == 4:
        r = _radius(p)[..., None]
        out[..., 0:2] = -perp(v) / (omega_c * r)
        out[..., 3:5] = v / r
    elif i == 5:
        out[..., 5] = 1.0
    else:
        raise ValueError(f"field index {i} out of range 0..5")
    return out


def grad_psi(i: int, p: PhasePoint, omega_c: float) -> np.ndarray:
    """Gradient of psi_i in full (x, v) coordinates."""
    _check_omega(omega_c)
    shape = np.shape(p.x3)
    out = np.zeros(shape + (6,))
    v = p.v_perp
    if i == 0:
        r = _radius(p)[..., None]
        out[..., 3:5] = perp(v) / (omega_c * r**2)
    elif i == 1:
        out[..., 0] = 1.0
        out[..., 4] = 1.0 / omega_c
    elif i == 2:
        out[..., 1] = 1.0
        out[..., 3] = -1.0 / omega_c
    elif i == 3:
        out[..., 2] = 1.0
    elif i == 4:
        r = _radius(p)[..., None]
        out[..., 3:5] = v / r
    elif i == 5:
        out[..., 5] = 1.0
    else:
        raise ValueError(f"invariant index {i} out of range 0..5")
    return out
