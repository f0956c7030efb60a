"""Property suites behind `gyrokin verify`.

Each check returns a measured value and the tolerance it is held to.  All random
inputs come from one seeded generator per suite, so reports are reproducible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .boltzmann import BoltzmannAvgConfig, apply_qb_avg
from .fokker_planck import apply_qfp_avg, qfp_dissipation
from .geometry import Gyrophase, InvariantCoords, PhasePoint, b_field, flow, from_invariants, grad_psi, to_invariants
from .grid import ReducedDensity, ReducedGrid
from .gyroaverage import GyroQuadratureConfig, gyroaverage_scalar
from .kernels import (EPS_SIGNS, KernelPoint, a_minus, a_minus_four_term, a_minus_seven_term, a_plus,
                      a_plus_four_term, a_plus_seven_term, chi_quadrature, eta_fields)
from .landau import FplConfig, apply_qfpl_avg, conserved_weights, fpl_weak_form
from .physics import PlasmaParams, Potential, averaged_field_components, efield, maxwellian_rv
from .geometry import perp

SUITES = ("geometry", "kernels", "boltzmann", "fp", "landau")
FAULTS = ("chi_pi2",)


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool


def _check(suite, name, value, tol, passed=None):
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return Check(suite, name, value, float(tol), ok)


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# random inputs --------------------------------------------------------------------------------

def random_phase_points(rng, n, bound=10.0, r_min=0.1):
    x = rng.uniform(-bound, bound, (n, 2)) / np.sqrt(2)
    x3 = rng.uniform(-bound, bound, n)
    r = rng.uniform(r_min, bound / 2, n)
    a = rng.uniform(0, 2 * np.pi, n)
    v = np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)
    return PhasePoint.make(x, x3, v, rng.uniform(-bound / 2, bound / 2, n))


def random_support_points(rng, n, r_range=(0.2, 3.0), v_range=2.0):
    """Kernel points strictly inside |r - r'| < |z| < r + r' (5 percent margin)."""
    r = rng.uniform(*r_range, n)
    rp = rng.uniform(*r_range, n)
    lo, hi = np.abs(r - rp), r + rp
    zn = lo + (hi - lo) * rng.uniform(0.05, 0.95, n)
    ang = rng.uniform(0, 2 * np.pi, n)
    z = zn[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    return KernelPoint.make(r, rng.uniform(-v_range, v_range, n), rp, rng.uniform(-v_range, v_range, n), z)


def small_grid(L=12.0, n_y=8, n_r=6, n_v3=8, n3=1):
    return ReducedGrid(L=(L, L), n_y=(n_y, n_y), L3=1.0, n3=n3, R_max=4.0, n_r=n_r, V3=4.0, n_v3=n_v3)


def random_positive_density(rng, grid, params, amp=0.3, modes=3):
    """M(r, v3) times a positive random smooth modulation in (y, r, v3), peaked mid-box."""
    y1, y2, x3, r, v3 = grid.mesh()
    L1, L2 = grid.L
    mod = np.exp(-0.5 * ((y1 - L1 / 2) ** 2 + (y2 - L2 / 2) ** 2) / (L1 / 12) ** 2)
    for _ in range(modes):
        k1, k2 = rng.integers(-2, 3, 2)
        ph = rng.uniform(0, 2 * np.pi)
        cr, cv = rng.normal(size=2)
        mod = mod * (1 + amp * np.sin(2 * np.pi * (k1 * y1 / L1 + k2 * y2 / L2) + ph)
                     * np.tanh(0.3 * (cr * r + cv * v3) + 1.0))
    vals = mod * maxwellian_rv(r, v3, params) + 0 * x3
    return ReducedDensity(grid, np.ascontiguousarray(vals))


def conservation_defects(rate, g, params):
    """Relative rates of the conserved functionals: |sum mu Q w| / (sum mu |Q| max|w|)."""
    vol = g.grid.cell_volume
    scale = float(np.sum(np.abs(rate) * vol))
    out = {}
    support = g.values > 1e-12 * g.values.max()
    for name, w in conserved_weights(g.grid, params).items():
        wmax = float(np.max(np.abs(np.broadcast_to(w, g.grid.shape)[support]))) or 1.0
        out[name] = abs(float(np.sum(rate * w * vol))) / (scale * wmax)
    return out


# suites --------------------------------------------------------------------------------------

def suite_geometry(rng, fault=None):
    S = "geometry"
    out = []
    worst_per = worst_inv = 0.0
    for oc in (1.0, -1.0, 5.0, -5.0):
        p = random_phase_points(rng, 50)
        q = flow(2 * np.pi / abs(oc), p, oc)
        worst_per = max(worst_per, float(np.max(np.abs(q.as_array() - p.as_array()))))
        s = rng.uniform(-5, 5, 50)
        i0, _ = to_invariants(p, oc)
        i1, _ = to_invariants(flow(s, p, oc), oc)
        for a, b in zip((i0.y, i0.x3, i0.r, i0.v3), (i1.y, i1.x3, i1.r, i1.v3)):
            worst_inv = max(worst_inv, float(np.max(np.abs(a - b))))
    out.append(_check(S, "flow_periodicity", worst_per, 1e-12))
    out.append(_check(S, "invariance_under_flow", worst_inv, 1e-12))

    oc = 1.7
    p = random_phase_points(rng, 100)
    B = np.stack([b_field(i, p, oc) for i in range(6)], axis=-2)
    G = np.stack([grad_psi(j, p, oc) for j in range(6)], axis=-2)
    dual = np.einsum("nia,nja->nij", B, G)
    out.append(_check(S, "duality", np.max(np.abs(dual - np.eye(6))), 1e-12))

    # [b^i, b^j] = (Db^j) b^i - (Db^i) b^j by central differences
    h = 1e-5
    p = random_phase_points(rng, 20, r_min=0.5)
    X = p.as_array()

    def jac(i):
        J = np.zeros(X.shape + (6,))
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            J[..., k] = (b_field(i, PhasePoint.from_array(X + e), oc)
                         - b_field(i, PhasePoint.from_array(X - e), oc)) / (2 * h)
        return J

    Js = [jac(i) for i in range(6)]
    Bs = [b_field(i, p, oc) for i in range(6)]
    br = max(float(np.max(np.abs(np.einsum("nab,nb->na", Js[j], Bs[i]) - np.einsum("nab,nb->na", Js[i], Bs[j]))))
             for i in range(6) for j in range(i + 1, 6))
    out.append(_check(S, "commuting_fields", br, 1e-7))

    params = PlasmaParams(q=1.0, m=1.0, B=2.0)
    cfg = GyroQuadratureConfig(32)
    p = random_phase_points(rng, 30, bound=4.0)
    k = rng.uniform(0.2, 1.0, 3)

    def u(pp):
        return np.cos(k[0] * pp.x_perp[..., 0] + pp.v_perp[..., 1]) * np.exp(-0.1 * pp.v3**2) \
            + np.sin(k[1] * pp.x_perp[..., 1] - 0.5 * pp.v_perp[..., 0]) * np.cos(k[2] * pp.x3)

    avg = gyroaverage_scalar(u, p, params, cfg)
    idem = gyroaverage_scalar(lambda pp: gyroaverage_scalar(u, pp, params, cfg), p, params, cfg)
    out.append(_check(S, "gyroaverage_idempotence", np.max(np.abs(idem - avg)), 1e-12))
    s = rng.uniform(-3, 3, 30)
    moved = gyroaverage_scalar(u, flow(s, p, params.omega_c), params, cfg)
    out.append(_check(S, "gyroaverage_flow_invariance", np.max(np.abs(moved - avg)), 1e-12))

    pot = Potential(family="separable", k_perp=0.3, k_par=0.2, a_perp=0.4, wavenumbers=(0.7, 0.5),
                    a_par=0.3, kz=0.9)
    _, e3 = averaged_field_components(p, pot, params, 32)
    e3_exact = efield(np.concatenate([p.x_perp, p.x3[:, None]], axis=-1), pot)[:, 2]
    out.append(_check(S, "parallel_field_pointwise", np.max(np.abs(e3 - e3_exact)), 1e-12))
    pe0, _ = averaged_field_components(p, pot, params, 32)
    pe1, _ = averaged_field_components(flow(s, p, params.omega_c), pot, params, 32)
    out.append(_check(S, "averaged_field_invariance", np.max(np.abs(pe1 - pe0)), 1e-10))
    return out


def suite_kernels(rng, fault=None):
    S = "kernels"
    out = []
    worst, reported = 0.0, 1.0
    for _ in range(100):
        r, rp = rng.uniform(0.05, 5.0, 2)
        wsum = float(np.sum(chi_quadrature(r, rp, 8, 16).weights))
        if fault == "chi_pi2":
            wsum /= np.pi**2
        if abs(wsum - 1) >= worst:
            worst, reported = abs(wsum - 1), wsum
    out.append(Check(S, "chi_normalization", reported, 1e-14, bool(worst <= 1e-14)))

    kp = random_support_points(rng, 10_000)
    r, rp, zn = kp.r, kp.r_p, kp.z_norm
    phi = np.arccos(np.clip((r * r + rp * rp - zn * zn) / (2 * r * rp), -1, 1))
    psi = np.arccos(np.clip((rp * rp - r * r - zn * zn) / (2 * r * zn), -1, 1))
    # signed psi so that the sine theorem uses the oriented angle; sin(psi - phi) > 0 here
    res = [
        zn**2 - (r * r + rp * rp - 2 * r * rp * np.cos(phi)),
        r * r - (rp * rp + zn * zn - 2 * rp * zn * np.cos(psi - phi)),
        r * np.cos(psi) - rp * np.cos(psi - phi) + zn,
        r * np.sin(psi) - rp * np.sin(psi - phi),
    ]
    names = ("cosine_theorem_z", "cosine_theorem_r", "projection_identity", "sine_theorem")
    for name, x in zip(names, res):
        out.append(_check(S, f"geometry_{name}", np.max(np.abs(x)), 1e-12))

    kp = random_support_points(rng, 1000)
    al, alp = rng.uniform(0, 2 * np.pi, (2, 1000))
    Ap, Am = a_plus(kp, al, alp, None), a_minus(kp, al, alp, None)
    nrm = np.max(np.abs(Ap))
    out.append(_check(S, "a_plus_four_term", np.max(np.abs(a_plus_four_term(kp, al, alp) - Ap)) / nrm, 1e-12))
    out.append(_check(S, "a_minus_four_term", np.max(np.abs(a_minus_four_term(kp, al, alp) - Am)) / nrm, 1e-12))
    out.append(_check(S, "a_plus_seven_term", np.max(np.abs(a_plus_seven_term(kp, al, alp) - Ap)) / nrm, 1e-12))
    out.append(_check(S, "a_minus_seven_term", np.max(np.abs(a_minus_seven_term(kp, al, alp) - Am)) / nrm, 1e-12))
    eta, etap = eta_fields(kp, *(np.stack([np.cos(a), np.sin(a)], -1) for a in (al, alp)))
    cross = np.einsum("i,nia,nib->nab", EPS_SIGNS, eta, etap)
    out.append(_check(S, "a_minus_eps_cross_form", np.max(np.abs(cross - Am)) / nrm, 1e-12))
    out.append(_check(S, "a_plus_symmetry", np.max(np.abs(Ap - np.swapaxes(Ap, -1, -2))) / nrm, 1e-14))
    ev = np.linalg.eigvalsh(Ap)
    scale = np.max(np.abs(ev), axis=-1)
    out.append(_check(S, "a_plus_psd", max(0.0, float(np.max(-ev[:, 0] / scale))), 1e-12))
    out.append(_check(S, "a_plus_rank_le_4", np.max(np.abs(ev[:, :2]) / scale[:, None]), 1e-12))
    e3 = np.zeros(6)
    e3[2] = 1.0
    n2 = np.concatenate([kp.z, np.zeros((1000, 1)), -perp(kp.z), (kp.v3 - kp.v3_p)[:, None]], axis=-1)
    n2 = n2 / np.linalg.norm(n2, axis=-1, keepdims=True)
    null = max(float(np.max(np.abs(Ap @ e3))), float(np.max(np.abs(np.einsum("nab,nb->na", Ap, n2)))))
    out.append(_check(S, "a_plus_null_vectors", null / nrm, 1e-12))
    return out


def _rel_to(a, scale):
    return float(np.max(np.abs(a)) / scale)


def suite_boltzmann(rng, fault=None):
    S = "boltzmann"
    out = []
    params = PlasmaParams()
    grid = small_grid(n3=2)
    cfg = BoltzmannAvgConfig(n_phi=4, n_alpha=8)
    y1, y2, x3, r, v3 = grid.mesh()
    M = ReducedDensity(grid, np.ascontiguousarray(np.broadcast_to(maxwellian_rv(r, v3, params), grid.shape)))
    gain_scale = float(np.max(np.abs(apply_qb_avg(M, params, cfg) + M.values)))  # loss-free scale proxy
    qm = apply_qb_avg(M, params, cfg)
    out.append(_check(S, "maxwellian_equilibrium", _rel_to(qm, max(gain_scale, 1e-300)), 1e-10))
    f = random_positive_density(rng, grid, params)
    h = random_positive_density(rng, grid, params)
    Mv = M.values
    vol = grid.cell_volume
    qf, qh = apply_qb_avg(f, params, cfg), apply_qb_avg(h, params, cfg)
    a = float(np.sum(qf * h.values / Mv * vol))
    b = float(np.sum(qh * f.values / Mv * vol))
    out.append(_check(S, "symmetry", abs(a - b) / (abs(a) + abs(b)), 1e-12))
    neg = float(np.sum(qf * f.values / Mv * vol))
    out.append(Check(S, "negativity", neg, 0.0, bool(neg <= 0.0)))
    pert = f.values.copy()
    pert[:, :, 1] *= 1.5
    q2 = apply_qb_avg(ReducedDensity(grid, pert), params, cfg)
    out.append(_check(S, "x3_locality", np.max(np.abs(q2[:, :, 0] - qf[:, :, 0])), 1e-14 * np.max(np.abs(qf))))
    mass = abs(float(np.sum(qf * vol))) / float(np.sum(np.abs(qf) * vol))
    out.append(_check(S, "mass_conservation", mass, 1e-12))
    return out


def suite_fp(rng, fault=None):
    S = "fp"
    out = []
    params = PlasmaParams(theta=1.3, tau=0.7)
    grid = small_grid(n3=2, n_r=8, n_v3=10)
    y1, y2, x3, r, v3 = grid.mesh()
    M = np.broadcast_to(maxwellian_rv(r, v3, params), grid.shape)
    q = apply_qfp_avg(ReducedDensity(grid, np.ascontiguousarray(M * (1 + 0 * y1))), params)
    out.append(_check(S, "maxwellian_equilibrium", np.max(np.abs(q)) / np.max(M), 1e-14))
    f = random_positive_density(rng, grid, params)
    qf = apply_qfp_avg(f, params)
    vol = grid.cell_volume
    out.append(_check(S, "mass_conservation", abs(float(np.sum(qf * vol))) / float(np.sum(np.abs(qf) * vol)), 1e-12))
    d = qfp_dissipation(f, params)
    out.append(Check(S, "dissipation", d, 0.0, bool(d <= 0.0)))
    slab = f.values.copy()
    slab[:, :, 1] *= 2.5
    q2 = apply_qfp_avg(ReducedDensity(grid, slab), params)
    out.append(_check(S, "no_x3_transport", np.max(np.abs(q2[:, :, 1] - 2.5 * qf[:, :, 1])) / np.max(np.abs(qf)),
                      1e-13))
    return out


def suite_landau(rng, fault=None):
    S = "landau"
    out = []
    params = PlasmaParams()
    grid = small_grid(n_y=16, n_r=6, n_v3=8)
    cfg = FplConfig(n_phi=4, n_alpha=8)
    worst = {}
    for _ in range(2):
        g = random_positive_density(rng, grid, params, amp=0.2)
        for k, v in conservation_defects(apply_qfpl_avg(g, params, cfg), g, params).items():
            worst[k] = max(worst.get(k, 0.0), v)
    for k, v in worst.items():
        out.append(_check(S, f"conservation_{k}", v, 1e-6))
    g = random_positive_density(rng, grid, params, amp=0.2)
    ep = fpl_weak_form(g, "log", params, cfg)
    out.append(Check(S, "entropy_production", ep, 0.0, bool(ep <= 0.0)))
    y1, y2, x3, r, v3 = grid.mesh()
    Mv = np.ascontiguousarray(np.broadcast_to(maxwellian_rv(r, v3, params), grid.shape))
    M = ReducedDensity(grid, Mv)
    qm = apply_qfpl_avg(M, params, cfg)
    pert = ReducedDensity(grid, Mv * (1 + 0.5 * np.tanh(v3 - r + 1)))
    ref = np.max(np.abs(apply_qfpl_avg(pert, params, cfg)))
    out.append(_check(S, "maxwellian_equilibrium", np.max(np.abs(qm)) / ref, 1e-10))
    return out


_SUITE_FUNCS = {"geometry": suite_geometry, "kernels": suite_kernels, "boltzmann": suite_boltzmann,
                "fp": suite_fp, "landau": suite_landau}


def run_suites(suite: str = "all", seed: int = 0, fault: str | None = None) -> dict:
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    names = SUITES if suite == "all" else (suite,)
    checks = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed, k])
        checks.extend(_SUITE_FUNCS[name](rng, fault))
    return {"suite": suite, "seed": seed, "fault": fault, "passed": all(c.passed for c in checks),
            "checks": [asdict(c) for c in checks]}


__all__ = ["SUITES", "FAULTS", "run_suites", "Check", "random_positive_density", "random_support_points",
           "random_phase_points", "conservation_defects", "small_grid"]
