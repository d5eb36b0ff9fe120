import numpy as np
import pytest
from scipy.integrate import quad

from skyrmewave.fields import FieldState, make_grid
from skyrmewave.model import turok_spergel


def ts_state(t, grid, T0=0.0):
    """Exact Turok-Spergel samples on ``grid`` at time ``t``."""
    u, ut, _ = turok_spergel(t, grid.r, T0)
    return FieldState(t, u, ut, grid)


def ts_snapshots(grid, times, T0=0.0):
    return [ts_state(float(t), grid, T0) for t in times]


def quad_radial(f, a, b, power=2):
    """Adaptive-quadrature oracle for the integral of r**power * f(r)."""
    val, err = quad(lambda r: r**power * f(r), a, b, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def zero_state():
    g = make_grid(2.5, 64)
    return FieldState(-1.0, np.zeros(g.N), np.zeros(g.N), g)


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
