"""Plasma parameters, Maxwellian, cross sections and analytic potentials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PhasePoint, perp


@dataclass(frozen=True)
class PlasmaParams:
    q: float = 1.0
    m: float = 1.0
    B: float = 1.0
    theta: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for name in ("m", "B", "theta", "tau"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val}")
        if not (np.isfinite(self.q) and self.q != 0):
            raise ValueError("q must be nonzero")

    @property
    def omega_c(self) -> float:
        return self.q * self.B / self.m


def maxwellian(v, params: PlasmaParams):
    """M(v) for v of shape (..., 3)."""
    v = np.asarray(v, dtype=float)
    v2 = np.sum(v * v, axis=-1)
    return maxwellian_rv(0.0, 0.0, params, v2=v2)


def maxwellian_rv(r, v3, params: PlasmaParams, v2=None):
    """M written through the invariants r = |v_perp| and v3."""
    if v2 is None:
        v2 = np.asarray(r, dtype=float) ** 2 + np.asarray(v3, dtype=float) ** 2
    a = params.m / params.theta
    return (a / (2.0 * np.pi)) ** 1.5 * np.exp(-0.5 * a * v2)


@dataclass(frozen=True)
class CrossSection:
    """sigma(s) = sigma0 (constant) or sigma0 (s^2 + delta^2)^(gamma/2).

    Bounds s0 <= sigma <= S0 are declared on the speed range [s_min, s_max].
    """

    family: str = "constant"
    sigma0: float = 1.0
    gamma: float = 0.0
    delta: float = 0.0
    s_min: float = 0.0
    s_max: float = 30.0

    def __post_init__(self):
        if self.family not in ("constant", "power-law"):
            raise ValueError(f"unknown cross-section family {self.family!r}")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.gamma < 0 or self.delta < 0:
            raise ValueError("gamma and delta must be non-negative")
        if not 0 <= self.s_min < self.s_max:
            raise ValueError("need 0 <= s_min < s_max")
        if not (self.s0 > 0 and np.isfinite(self.S0)):
            raise ValueError(
                f"cross section violates 0 < s0 <= sigma <= S0 on [{self.s_min}, {self.s_max}]"
            )

    def __call__(self, s):
        return sigma_eval(s, self)

    @property
    def s0(self) -> float:
        return float(sigma_eval(self.s_min, self))

    @property
    def S0(self) -> float:
        return float(sigma_eval(self.s_max, self))


def sigma_eval(s, cs: CrossSection):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("speed must be non-negative")
    if cs.family == "constant":
        return np.full(s.shape, cs.sigma0)
    return cs.sigma0 * (s * s + cs.delta**2) ** (0.5 * cs.gamma)


POTENTIAL_FAMILIES = ("uniform", "harmonic", "separable")


@dataclass(frozen=True)
class Potential:
    """Analytic electrostatic potential.

    phi = g . x                                        (family "uniform")
    phi = k_perp/2 |xb - c|^2 + k_par/2 (x3 - c3)^2     (family "harmonic")
    "separable" adds a_perp cos(k1 x1) cos(k2 x2) to the perpendicular part and
    a_par cos(kz x3) to the parallel part of the harmonic form.
    """

    family: str = "uniform"
    gradient: tuple = (0.0, 0.0, 0.0)
    k_perp: float = 0.0
    k_par: float = 0.0
    center: tuple = (0.0, 0.0, 0.0)
    a_perp: float = 0.0
    wavenumbers: tuple = (0.0, 0.0)
    a_par: float = 0.0
    kz: float = 0.0

    def __post_init__(self):
        if self.family not in POTENTIAL_FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if len(self.gradient) != 3 or len(self.center) != 3 or len(self.wavenumbers) != 2:
            raise ValueError("gradient/center need 3 entries, wavenumbers 2")

    def _parts(self):
        g = np.array(self.gradient if self.family == "uniform" else (0.0, 0.0, 0.0))
        sep = self.family != "uniform"
        cos_on = self.family == "separable"
        return g, sep, cos_on

    def phi_perp(self, x_perp):
        x_perp = np.asarray(x_perp, dtype=float)
        g, sep, cos_on = self._parts()
        out = x_perp @ g[:2]
        if sep:
            d = x_perp - np.array(self.center[:2])
            out = out + 0.5 * self.k_perp * np.sum(d * d, axis=-1)
        if cos_on:
            k1, k2 = self.wavenumbers
            out = out + self.a_perp * np.cos(k1 * x_perp[..., 0]) * np.cos(k2 * x_perp[..., 1])
        return out

    def phi_par(self, x3):
        x3 = np.asarray(x3, dtype=float)
        g, sep, cos_on = self._parts()
        out = g[2] * x3
        if sep:
            out = out + 0.5 * self.k_par * (x3 - self.center[2]) ** 2
        if cos_on:
            out = out + self.a_par * np.cos(self.kz * x3)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.phi_perp(x[..., :2]) + self.phi_par(x[..., 2])


def efield(x, pot: Potential):
    """E = -grad phi, analytic."""
    x = np.asarray(x, dtype=float)
    g, sep, cos_on = pot._parts()
    e = np.broadcast_to(-g, x.shape).copy()
    if sep:
        c = np.array(pot.center)
        e[..., 0:2] -= pot.k_perp * (x[..., 0:2] - c[:2])
        e[..., 2] -= pot.k_par * (x[..., 2] - c[2])
    if cos_on:
        k1, k2 = pot.wavenumbers
        c1, s1 = np.cos(k1 * x[..., 0]), np.sin(k1 * x[..., 0])
        c2, s2 = np.cos(k2 * x[..., 1]), np.sin(k2 * x[..., 1])
        e[..., 0] += pot.a_perp * k1 * s1 * c2
        e[..., 1] += pot.a_perp * k2 * c1 * s2
        e[..., 2] += pot.a_par * pot.kz * np.sin(pot.kz * x[..., 2])
    return e


def averaged_field_components(p: PhasePoint, pot: Potential, params: PlasmaParams, n_nodes: int = 32):
    """Gyroaverages of perp(E) = (E2, -E1) and of E3 over the Larmor circle of p."""
    from .gyroaverage import GyroQuadratureConfig, gyroaverage_scalar

    if n_nodes < 4:
        raise ValueError("n_nodes must be >= 4")

    def u(pp: PhasePoint):
        e = efield(np.concatenate([pp.x_perp, pp.x3[..., None]], axis=-1), pot)
        return np.concatenate([perp(e[..., :2]), e[..., 2:3]], axis=-1)

    avg = gyroaverage_scalar(u, p, params, GyroQuadratureConfig(n_nodes))
    return avg[..., :2], avg[..., 2]
