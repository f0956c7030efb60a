"""Time integration of the limit model and the drift verification harness.

d_t g + (<perp E>/B) . grad_y g + v3 d_x3 g + (q/m) <E3> d_v3 g = <Q>(g)

Transport is conservative upwind finite volume with SSP-RK2; collisions use
explicit RK2 with substeps below the operator's stability bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .boltzmann import BoltzmannAvgConfig, apply_qb_avg
from .fokker_planck import apply_qfp_avg
from .geometry import Gyrophase, InvariantCoords, from_invariants, perp
from .grid import ReducedDensity, ReducedGrid
from .landau import FplConfig, apply_qfpl_avg
from .physics import Potential, averaged_field_components, efield

log = logging.getLogger(__name__)

MODELS = ("none", "boltzmann", "fokker-planck", "landau")
SPLITTINGS = ("strang", "lie")
LIMITERS = ("upwind", "muscl")
# relative undershoot tolerated before a collision step is rejected; the Landau form has no
# maximum principle and leaves tiny undershoots in near-empty tail cells
NEGATIVITY_TOL = {"boltzmann": 1e-12, "fokker-planck": 1e-12, "landau": 1e-6}


class CFLError(ValueError):
    """Requested step exceeds the transport stability bound."""


class StepSizeError(RuntimeError):
    """A collision step produced negative density."""


@dataclass(frozen=True)
class SolverConfig:
    model: str = "none"
    T: float = 1.0
    dt: float | None = None
    cfl: float = 0.5
    splitting: str = "strang"
    cadence: int = 1
    limiter: str = "upwind"
    boltzmann: BoltzmannAvgConfig = field(default_factory=BoltzmannAvgConfig)
    landau: FplConfig = field(default_factory=FplConfig)
    landau_substeps: int = 1
    n_gyro: int = 32

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.splitting not in SPLITTINGS:
            raise ValueError(f"splitting must be one of {SPLITTINGS}")
        if self.limiter not in LIMITERS:
            raise ValueError(f"limiter must be one of {LIMITERS}")
        if not 0 < self.cfl <= 0.9:
            raise ValueError("cfl must lie in (0, 0.9]")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T > 0 or self.cadence < 1 or self.landau_substeps < 1:
            raise ValueError("need T > 0, cadence >= 1, landau_substeps >= 1")


@dataclass
class SolverState:
    density: ReducedDensity
    time: float = 0.0
    records: list = field(default_factory=list)


# transport ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class TransportFields:
    """Face velocities: u1 on y1 faces, u2 on y2 faces (shape N1, N2, n3, n_r), a3 at nodes."""

    u1: np.ndarray
    u2: np.ndarray
    a3: np.ndarray
    v3: np.ndarray

    def max_rate(self, grid: ReducedGrid) -> float:
        d1, d2, d3, _, dv = grid.steps
        rate = np.abs(self.u1).max() / d1 + np.abs(self.u2).max() / d2 + np.abs(self.a3).max() / dv
        if grid.n3 > 1:
            rate += np.abs(self.v3).max() / d3
        return float(rate)


def transport_fields(grid: ReducedGrid, pot: Potential, params, n_gyro: int = 32) -> TransportFields:
    y1, y2, x3, r, _ = grid.mesh()
    d1, d2 = grid.steps[:2]
    shp = grid.shape[:4]

    def drift(s1, s2):
        Y1, Y2, X3, R = np.broadcast_arrays(y1[..., 0] + s1, y2[..., 0] + s2, x3[..., 0], r[..., 0])
        inv = InvariantCoords(np.stack([Y1, Y2], axis=-1), X3, R, np.zeros(shp))
        p = from_invariants(inv, Gyrophase(np.zeros(shp)), params.omega_c)
        return averaged_field_components(p, pot, params, n_gyro)

    pe1, _ = drift(0.5 * d1, 0.0)
    pe2, _ = drift(0.0, 0.5 * d2)
    _, e3 = drift(0.0, 0.0)
    return TransportFields(pe1[..., 0] / params.B, pe2[..., 1] / params.B,
                           params.q / params.m * e3, grid.axes[4])


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _periodic_flux(g, u, axis, limiter):
    """Upwind flux at faces i+1/2 along a periodic axis; u broadcastable to faces."""
    gp = np.roll(g, -1, axis=axis)
    if limiter == "muscl":
        gm = np.roll(g, 1, axis=axis)
        slope = _minmod(g - gm, gp - g)
        left = g + 0.5 * slope
        right = gp - 0.5 * np.roll(slope, -1, axis=axis)
    else:
        left, right = g, gp
    return np.maximum(u, 0.0) * left + np.minimum(u, 0.0) * right


def transport_rate(g: np.ndarray, grid: ReducedGrid, tf: TransportFields, limiter: str = "upwind"):
    d1, d2, d3, _, dv = grid.steps
    out = np.zeros_like(g)
    F = _periodic_flux(g, tf.u1[..., None], 0, limiter)
    out -= (F - np.roll(F, 1, axis=0)) / d1
    F = _periodic_flux(g, tf.u2[..., None], 1, limiter)
    out -= (F - np.roll(F, 1, axis=1)) / d2
    if grid.n3 > 1:
        F = _periodic_flux(g, tf.v3, 2, limiter)
        out -= (F - np.roll(F, 1, axis=2)) / d3
    # v3 faces: interior only, zero flux through +-V3
    a = tf.a3[..., None]
    left, right = g[..., :-1], g[..., 1:]
    if limiter == "muscl":
        s = np.zeros_like(g)
        s[..., 1:-1] = _minmod(g[..., 1:-1] - g[..., :-2], g[..., 2:] - g[..., 1:-1])
        left, right = g[..., :-1] + 0.5 * s[..., :-1], g[..., 1:] - 0.5 * s[..., 1:]
    F = np.maximum(a, 0.0) * left + np.minimum(a, 0.0) * right
    F = np.concatenate([np.zeros(F.shape[:-1] + (1,)), F, np.zeros(F.shape[:-1] + (1,))], axis=-1)
    out -= (F[..., 1:] - F[..., :-1]) / dv
    return out


def max_transport_dt(grid: ReducedGrid, tf: TransportFields, cfl: float) -> float:
    rate = tf.max_rate(grid)
    return np.inf if rate == 0 else cfl / rate


def advect_step(state: SolverState, dt: float, tf: TransportFields, cfl: float = 0.9,
                limiter: str = "upwind") -> SolverState:
    grid = state.density.grid
    bound = max_transport_dt(grid, tf, 0.5 * cfl if limiter == "muscl" else cfl)
    if dt > bound * (1 + 1e-12):
        raise CFLError(f"dt={dt:g} exceeds the transport bound {bound:g}")
    g0 = state.density.values
    g1 = g0 + dt * transport_rate(g0, grid, tf, limiter)
    g2 = 0.5 * (g0 + g1 + dt * transport_rate(g1, grid, tf, limiter))
    return SolverState(ReducedDensity(grid, g2, state.density.meta), state.time, state.records)


# collisions ---------------------------------------------------------------------------------

def collision_rate(g: ReducedDensity, model: str, params, cfg: SolverConfig) -> np.ndarray:
    if model == "none":
        return np.zeros(g.grid.shape)
    if model == "boltzmann":
        return apply_qb_avg(g, params, cfg.boltzmann)
    if model == "fokker-planck":
        return apply_qfp_avg(g, params)
    if model == "landau":
        return apply_qfpl_avg(g, params, cfg.landau)
    raise ValueError(f"unknown model {model!r}")


def max_collision_dt(grid: ReducedGrid, model: str, params, cfg: SolverConfig) -> float:
    if model == "boltzmann":
        return params.tau / (2.0 * cfg.boltzmann.cs.S0)
    if model == "fokker-planck":
        d1, d2, _, dr, dv = grid.steps
        D = params.theta / (params.m * params.tau)
        lam = 4.0 * D * (1 / dr**2 + 1 / dv**2 + (1 / d1**2 + 1 / d2**2) / params.omega_c**2)
        # face/node ratios of r M inflate the stencil weights by at most this factor
        grow = 2.0 * np.exp(0.5 * params.m / params.theta * (grid.R_max * dr + grid.V3 * dv))
        return 1.0 / (lam * grow)
    return np.inf


def collide_step(state: SolverState, dt: float, model: str, params, cfg: SolverConfig) -> SolverState:
    if model == "none":
        return state
    g = state.density
    n_sub = max(1, int(np.ceil(dt / max_collision_dt(g.grid, model, params, cfg) - 1e-12)))
    if model == "landau":
        n_sub = max(n_sub, cfg.landau_substeps)
    h = dt / n_sub
    vals = g.values
    for _ in range(n_sub):
        k1 = collision_rate(ReducedDensity(g.grid, vals), model, params, cfg)
        mid = vals + h * k1
        k2 = collision_rate(ReducedDensity(g.grid, mid), model, params, cfg)
        vals = vals + 0.5 * h * (k1 + k2)
        if not np.all(np.isfinite(vals)) or vals.min() < -NEGATIVITY_TOL[model] * np.abs(vals).max():
            raise StepSizeError(f"collision step dt={h:g} produced negative density {vals.min():.3e}")
    return SolverState(ReducedDensity(g.grid, vals, g.meta), state.time, state.records)


# driver -------------------------------------------------------------------------------------

def choose_dt(grid, tf, params, cfg: SolverConfig) -> float:
    dt_t = max_transport_dt(grid, tf, 0.5 * cfg.cfl if cfg.limiter == "muscl" else cfg.cfl)
    if cfg.dt is not None:
        if cfg.dt > dt_t * (1 + 1e-12):
            raise CFLError(f"dt={cfg.dt:g} exceeds the transport bound {dt_t:g}")
        dt = cfg.dt
    else:
        dt = min(dt_t, max_collision_dt(grid, cfg.model, params, cfg), cfg.T)
    n = int(np.ceil(cfg.T / dt - 1e-9))
    return cfg.T / n


def run(cfg: SolverConfig, initial: ReducedDensity, pot: Potential, params, on_record=None, on_snapshot=None):
    """Splitting loop from an already projected initial density.

    Step errors carry the state before the failing step as `last_good`.

    on_record(record) receives each diagnostics row; on_snapshot(index, state) each cadence tick.
    """
    from .diagnostics import compute_diagnostics

    grid = initial.grid
    tf = transport_fields(grid, pot, params, cfg.n_gyro)
    dt = choose_dt(grid, tf, params, cfg)
    n_steps = int(round(cfg.T / dt))
    state = SolverState(initial.copy(), 0.0, [])
    log.info("run: model=%s dt=%g steps=%d", cfg.model, dt, n_steps)

    def emit(k):
        rec = compute_diagnostics(state.density, params, state.time, cfg)
        state.records.append(rec)
        if on_record:
            on_record(rec)
        if on_snapshot:
            on_snapshot(k // cfg.cadence, state)

    emit(0)
    for k in range(1, n_steps + 1):
        good = state
        try:
            if cfg.splitting == "strang":
                state = advect_step(state, 0.5 * dt, tf, cfg.cfl, cfg.limiter)
                state = collide_step(state, dt, cfg.model, params, cfg)
                state = advect_step(state, 0.5 * dt, tf, cfg.cfl, cfg.limiter)
            else:
                state = advect_step(state, dt, tf, cfg.cfl, cfg.limiter)
                state = collide_step(state, dt, cfg.model, params, cfg)
        except (CFLError, StepSizeError) as exc:
            exc.last_good = good
            raise
        state.time = k * dt
        if k % cfg.cadence == 0 or k == n_steps:
            emit(k)
    return state


# drift verification -------------------------------------------------------------------------

def averaged_trajectory(pot: Potential, params, y0, x3, r, v3, times, rtol: float = 1e-12, n_gyro: int = 64):
    """Solution (y1, y2, x3, v3) of dy/dt = <perp E>/B, dx3/dt = v3, dv3/dt = (q/m)<E3> at the given times."""
    oc, qm = params.omega_c, params.q / params.m
    times = np.asarray(times, dtype=float)

    def rhs(t, s):
        inv = InvariantCoords(s[None, :2], np.array([s[2]]), np.array([r]), np.array([s[3]]))
        p = from_invariants(inv, Gyrophase(np.zeros(1)), oc)
        pe, e3 = averaged_field_components(p, pot, params, n_gyro)
        return np.array([pe[0, 0] / params.B, pe[0, 1] / params.B, s[3], qm * e3[0]])

    sol = solve_ivp(rhs, (0.0, float(times[-1])), np.array([y0[0], y0[1], x3, v3], dtype=float), method="DOP853",
                    rtol=rtol, atol=1e-14, t_eval=times)
    return sol.y.T


def drift_check(pot: Potential, params, eps_list, T: float, x0=(0.5, 0.2, 0.0), v0=(0.8, 0.3, 0.1),
                n_times: int = 40, rtol: float = 1e-12, n_gyro: int = 64):
    """Max |filtered guiding center - averaged drift trajectory| for each epsilon.

    The fast system is dx/dt = v/eps, dv/dt = (q/m)E + (omega_c/eps) perp v (perpendicular),
    dx3/dt = v3, dv3/dt = (q/m)E3.  The filter averages x over one period eps T_c.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be positive and decreasing")
    oc, qm = params.omega_c, params.q / params.m
    Tc = 2.0 * np.pi / abs(oc)
    x0, v0 = np.asarray(x0, dtype=float), np.asarray(v0, dtype=float)
    r0 = float(np.hypot(v0[0], v0[1]))
    y0 = x0[:2] + perp(v0[:2]) / oc
    times = np.linspace(max(eps_list) * Tc, T, n_times)

    y_ref = averaged_trajectory(pot, params, y0, x0[2], r0, v0[2], times, rtol, n_gyro)[:, :2]

    xg, wg = np.polynomial.legendre.leggauss(48)
    rows = []
    for eps in eps_list:
        def fast(t, s):
            e = efield(s[:3], pot)
            v = s[3:]
            return np.array([v[0] / eps, v[1] / eps, v[2],
                             qm * e[0] + oc / eps * v[1], qm * e[1] - oc / eps * v[0], qm * e[2]])

        win = eps * Tc
        sol = solve_ivp(fast, (0.0, T + win), np.concatenate([x0, v0]), method="DOP853",
                        rtol=rtol, atol=1e-13, dense_output=True, max_step=win / 20)
        err = 0.0
        for t, yr in zip(times, y_ref):
            s = t + 0.5 * win * xg
            xbar = np.sum(wg[None, :] * sol.sol(s)[:2], axis=1) / 2.0
            err = max(err, float(np.linalg.norm(xbar - yr)))
        rows.append({"eps": eps, "error": err})
    for a, b in zip(rows, rows[1:]):
        b["order"] = float(np.log(a["error"] / b["error"]) / np.log(a["eps"] / b["eps"])) \
            if a["error"] > 0 and b["error"] > 0 else float("nan")
    return rows


__all__ = [
    "SolverConfig", "SolverState", "TransportFields", "CFLError", "StepSizeError", "transport_fields",
    "transport_rate", "advect_step", "collide_step", "collision_rate", "run", "drift_check", "choose_dt",
    "max_transport_dt", "max_collision_dt", "MODELS", "averaged_trajectory",
]
