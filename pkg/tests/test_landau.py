import numpy as np
import pytest

from gyrokin.geometry import Gyrophase, from_invariants
from gyrokin.grid import ReducedDensity
from gyrokin.gyroaverage import GyroQuadratureConfig, VelocityQuadrature
from gyrokin.landau import (FplConfig, apply_qfpl_avg, fpl_conserved_functionals, fpl_flux, fpl_weak_form,
                            qfpl_oracle, qfpl_pointwise)
from gyrokin.physics import CrossSection, PlasmaParams
from gyrokin.verify import conservation_defects, random_positive_density, small_grid

from conftest import as_full, gaussian_invariant, grid_maxwellian, random_nodes

PARAMS = PlasmaParams()
CFG = FplConfig(n_phi=4, n_alpha=8)


@pytest.fixture(scope="module")
def grid():
    return small_grid(n_y=16, n_r=6, n_v3=8)


def test_config_validation():
    with pytest.raises(ValueError):
        FplConfig(n_alpha=9)
    with pytest.raises(ValueError):
        FplConfig(floor=0.0)


def test_maxwellian_is_equilibrium(grid):
    M = grid_maxwellian(grid, PARAMS)
    pert = grid_maxwellian(grid, PARAMS, lambda y1, y2, x3: 1.0 + 0 * y1)
    pert = ReducedDensity(grid, pert.values * (1 + 0.3 * np.tanh(grid.mesh()[4])))
    ref = np.max(np.abs(apply_qfpl_avg(pert, PARAMS, CFG)))
    assert np.max(np.abs(apply_qfpl_avg(M, PARAMS, CFG))) < 1e-12 * ref


def test_conservation(grid, rng):
    g = random_positive_density(rng, grid, PARAMS, amp=0.2)
    for name, defect in conservation_defects(apply_qfpl_avg(g, PARAMS, CFG), g, PARAMS).items():
        assert defect < 1e-6, name


def test_conserved_functionals_include_zero_perp_momentum(grid, rng):
    out = fpl_conserved_functionals(random_positive_density(rng, grid, PARAMS), PARAMS)
    assert out["px"] == 0.0 and out["py"] == 0.0 and out["mass"] > 0


def test_entropy_production_nonpositive(grid, rng):
    for _ in range(3):
        g = random_positive_density(rng, grid, PARAMS, amp=0.3)
        assert fpl_weak_form(g, "log", PARAMS, CFG) <= 0


def _weak_strong_gap(n_y):
    grid = small_grid(n_y=n_y, n_r=5, n_v3=6)
    g = random_positive_density(np.random.default_rng(1), grid, PARAMS)
    y1, y2, _, r, v3 = grid.mesh()
    phi = np.broadcast_to(np.sin(2 * np.pi * y1 / 12) * np.cos(2 * np.pi * y2 / 12) * (1 + r) * v3, grid.shape)
    strong = np.sum(apply_qfpl_avg(g, PARAMS, CFG) * phi * grid.cell_volume)
    weak, scale = fpl_weak_form(g, phi, PARAMS, CFG, return_scale=True)
    return abs(strong - weak) / scale


def test_weak_form_matches_strong_form():
    """Interpolated shifts are not multiplicative, so the symmetrized form agrees up to interpolation error."""
    coarse, fine = _weak_strong_gap(8), _weak_strong_gap(16)
    assert fine < 1e-8 and fine < 1e-3 * coarse


def test_strong_entropy_production_nonpositive(grid, rng):
    g = random_positive_density(rng, grid, PARAMS, amp=0.3)
    assert np.sum(apply_qfpl_avg(g, PARAMS, CFG) * np.log(g.values) * grid.cell_volume) < 0


def test_polarized_form_is_bilinear(rng):
    grid = small_grid(n_y=8, n_r=5, n_v3=6)
    f = random_positive_density(rng, grid, PARAMS)
    h1 = random_positive_density(rng, grid, PARAMS)
    h2 = random_positive_density(rng, grid, PARAMS)
    lhs = apply_qfpl_avg(f, PARAMS, CFG, ReducedDensity(grid, h1.values + 2 * h2.values))
    rhs = apply_qfpl_avg(f, PARAMS, CFG, h1) + 2 * apply_qfpl_avg(f, PARAMS, CFG, h2)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.max(np.abs(lhs)))
    assert np.array_equal(apply_qfpl_avg(f, PARAMS, CFG, f), apply_qfpl_avg(f, PARAMS, CFG))


def test_local_in_x3(rng):
    grid = small_grid(n_y=8, n_r=5, n_v3=6, n3=2)
    g = random_positive_density(rng, grid, PARAMS)
    q0 = apply_qfpl_avg(g, PARAMS, CFG)
    v = g.values.copy()
    v[:, :, 1] *= 2.0
    q1 = apply_qfpl_avg(ReducedDensity(grid, v), PARAMS, CFG)
    assert np.array_equal(q0[:, :, 0], q1[:, :, 0])
    assert np.allclose(q1[:, :, 1], 4.0 * q0[:, :, 1])


def test_flux_has_no_x3_component(rng):
    grid = small_grid(n_y=8, n_r=5, n_v3=6)
    F = fpl_flux(random_positive_density(rng, grid, PARAMS), None, PARAMS, CFG)
    assert F.shape == (5,) + grid.shape and not np.any(F[2])


def test_pointwise_matches_full_landau_oracle(rng):
    """20-node spot check of the reduced closed form against the gyroaverage of the full operator."""
    params = PlasmaParams(B=2.0)
    cs = CrossSection()
    g = gaussian_invariant()
    nodes = random_nodes(rng, 20)
    closed = qfpl_pointwise(g, nodes, params, FplConfig(cs=cs, n_phi=8, n_alpha=16, n_rp=12, n_v3p=12))
    p = from_invariants(nodes, Gyrophase(rng.uniform(0, 2 * np.pi, 20)), params.omega_c)
    oracle = qfpl_oracle(as_full(g, params.omega_c), p, params, cs, GyroQuadratureConfig(16), VelocityQuadrature(8, 16))
    assert np.max(np.abs(closed - oracle)) <= 3e-3 * np.max(np.abs(oracle))
