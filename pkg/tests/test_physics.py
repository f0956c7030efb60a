import numpy as np
import pytest
from scipy.integrate import quad

from gyrokin.geometry import flow
from gyrokin.physics import (CrossSection, PlasmaParams, Potential, averaged_field_components, efield, maxwellian,
                             maxwellian_rv)
from gyrokin.verify import random_phase_points


def test_maxwellian_normalized():
    p = PlasmaParams(m=2.0, theta=0.7)
    val, _ = quad(lambda s: 4 * np.pi * s * s * maxwellian_rv(s, 0.0, p), 0, 20)
    assert abs(val - 1) < 1e-12
    assert np.isclose(maxwellian(np.array([0.3, 0.4, 0.5]), p), maxwellian_rv(0.5, 0.5, p))


@pytest.mark.parametrize("kw", [dict(m=0.0), dict(B=-1.0), dict(theta=0.0), dict(tau=-2.0), dict(q=0.0)])
def test_params_validated(kw):
    with pytest.raises(ValueError):
        PlasmaParams(**kw)


def test_omega_sign():
    assert PlasmaParams(q=-1.0, B=2.0, m=4.0).omega_c == -0.5


def test_cross_section_bounds():
    cs = CrossSection("power-law", 2.0, 1.0, 0.5, s_min=0.0, s_max=10.0)
    s = np.linspace(0, 10, 101)
    assert np.all(cs(s) >= cs.s0 - 1e-15) and np.all(cs(s) <= cs.S0 + 1e-15)
    assert CrossSection().S0 == CrossSection().s0 == 1.0


def test_cross_section_degenerate_rejected():
    with pytest.raises(ValueError):
        CrossSection("power-law", 1.0, 1.0, 0.0)  # sigma(0) = 0 on [0, s_max]
    with pytest.raises(ValueError):
        CrossSection("tabulated")


@pytest.mark.parametrize("pot", [
    Potential("uniform", gradient=(0.3, -0.2, 0.5)),
    Potential("harmonic", k_perp=0.4, k_par=0.3, center=(1.0, -1.0, 0.5)),
    Potential("separable", k_perp=0.2, a_perp=0.3, wavenumbers=(0.7, 1.1), a_par=0.4, kz=0.8),
])
def test_efield_is_minus_gradient(pot, rng):
    x = rng.normal(size=(20, 3))
    h = 1e-6
    fd = np.stack([(pot(x - h * e) - pot(x + h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    assert np.allclose(efield(x, pot), fd, atol=1e-8)


def test_uniform_field_average_is_exact():
    params = PlasmaParams(B=1.5)
    pot = Potential("uniform", gradient=(0.3, -0.2, 0.5))
    p = random_phase_points(np.random.default_rng(0), 10)
    pe, e3 = averaged_field_components(p, pot, params)
    assert np.allclose(pe, [0.2, 0.3]) and np.allclose(e3, -0.5)


def test_harmonic_average_matches_closed_form():
    """For phi = k/2 |x - c|^2 the average of perp E over a circle is -k perp(y - c)."""
    params = PlasmaParams(B=1.5)
    pot = Potential("harmonic", k_perp=0.4, center=(1.0, -1.0, 0.0))
    p = random_phase_points(np.random.default_rng(1), 10)
    pe, _ = averaged_field_components(p, pot, params)
    from gyrokin.geometry import perp, to_invariants

    inv, _ = to_invariants(p, params.omega_c)
    assert np.allclose(pe, -0.4 * perp(inv.y - np.array([1.0, -1.0])), atol=1e-12)


def test_averaged_fields_gyro_invariant(rng):
    params = PlasmaParams(B=2.0)
    pot = Potential("separable", k_perp=0.2, a_perp=0.3, wavenumbers=(0.7, 1.1), a_par=0.4, kz=0.8)
    p = random_phase_points(rng, 30, bound=4.0)
    a = averaged_field_components(p, pot, params, 48)
    b = averaged_field_components(flow(rng.uniform(-3, 3, 30), p, params.omega_c), pot, params, 48)
    assert np.max(np.abs(a[0] - b[0])) < 1e-12 and np.max(np.abs(a[1] - b[1])) < 1e-12
    assert np.allclose(a[1], efield(np.concatenate([p.x_perp, p.x3[:, None]], -1), pot)[:, 2], atol=1e-13)


def test_potential_family_checked():
    with pytest.raises(ValueError):
        Potential("quartic")
