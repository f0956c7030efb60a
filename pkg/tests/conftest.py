import numpy as np
import pytest

from gyrokin.geometry import InvariantCoords, PhasePoint, to_invariants
from gyrokin.grid import ReducedDensity, ReducedGrid
from gyrokin.physics import PlasmaParams, maxwellian_rv


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return PlasmaParams(q=1.0, m=1.0, B=2.0, theta=1.0, tau=1.0)


def gaussian_invariant(y0=(0.3, -0.2), sy=0.8, sr=1.2, v0=0.3, sv=1.0):
    """A constrained Gaussian g(y, x3, r, v3)."""
    y0 = np.asarray(y0, dtype=float)

    def g(y, x3, r, v3):
        d = np.asarray(y, dtype=float) - y0
        return np.exp(-0.5 * np.sum(d * d, -1) / sy - 0.5 * np.asarray(r) ** 2 / sr
                      - 0.5 * (np.asarray(v3) - v0) ** 2 / sv)

    return g


def as_full(g, omega_c):
    def f(p: PhasePoint):
        inv, _ = to_invariants(p, omega_c)
        return g(inv.y, inv.x3, inv.r, inv.v3)

    return f


def random_nodes(rng, n, y_scale=0.6, r_range=(0.3, 2.0), v_range=1.2):
    return InvariantCoords(rng.uniform(-y_scale, y_scale, (n, 2)), np.zeros(n),
                           rng.uniform(*r_range, n), rng.uniform(-v_range, v_range, n))


def grid_maxwellian(grid, params, density=None):
    y1, y2, x3, r, v3 = grid.mesh()
    vals = maxwellian_rv(r, v3, params) * (1.0 if density is None else density(y1, y2, x3))
    return ReducedDensity(grid, np.ascontiguousarray(np.broadcast_to(vals, grid.shape)))


def centered_blob(grid, params, width=1.0, amp=0.2, center_shift=(0.0, 0.2), temp=(1.1, 0.9), v0=0.2):
    """Gaussian blob in the middle of the periodic box with a smooth asymmetric modulation."""
    y1, y2, x3, r, v3 = grid.mesh()
    c1, c2 = grid.L[0] / 2 + center_shift[0], grid.L[1] / 2 + center_shift[1]
    d1, d2 = y1 - c1, y2 - c2
    vals = np.exp(-0.5 * (d1**2 + d2**2) / width**2 - 0.5 * r * r / temp[0] - 0.5 * (v3 - v0) ** 2 / temp[1])
    vals = vals * (1 + amp * np.sin(d1)) + 0 * x3
    return ReducedDensity(grid, np.ascontiguousarray(vals))


# acceptance lines, printed as one block at the end of the session
ACCEPTANCE = []


def report_criterion(number, title, value, tolerance, passed):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} (measured {value:.3e}, bound {tolerance:.1e})"
    ACCEPTANCE.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
