"""Static degree-one soliton of the Adkins-Nappi model by shooting on the slope.

The static equation

    u'' + (2/r) u' = sin(2u)/r^2 + (u - sin u cos u)(1 - cos 2u)/r^4

is integrated outward from r = eps with the regular series
``u = a r + b r**3``.  Too small a slope makes the profile fall back through
pi/2 (undershoot); too large a slope drives it past pi (overshoot).
Bisection on ``a`` between the two behaviours converges to the soliton.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .diagnostics import energy_slice
from .fields import FieldState, make_grid
from .model import ModelKind, charge_function, nonlinearity, winding_number

log = logging.getLogger(__name__)

OVERSHOOT_MARGIN = 0.01
START_FRACTION = 1e-4      # largest start radius, as a fraction of r_max
ODE_RTOL = 1e-12
ODE_ATOL = 1e-13


class Shot(enum.Enum):
    UNDER = "undershoot"
    OVER = "overshoot"
    UNDECIDED = "undecided"


class IntegrationFailure(RuntimeError):
    pass


class NoBracket(RuntimeError):
    pass


def cubic_coefficient(a: float) -> float:
    """r**3 coefficient of the regular solution u = a r + b r**3 + O(r**5).

    Both the wave-map terms and the repulsive term enter at this order:
    10 b = (4/3)(a**5 - a**3).
    """
    return 2.0 * a**3 * (a * a - 1.0) / 15.0


def _rhs(r, y):
    u, p = y
    s, c = math.sin(u), math.cos(u)
    q = float(charge_function(u)) if abs(u) < 1e-2 else u - s * c
    r2 = r * r
    return [p, -2.0 * p / r + 2.0 * s * c / r2 + 2.0 * q * s * s / (r2 * r2)]


def start_radius(a: float, r_max: float) -> float:
    """Where the series start hands over to the integrator.

    The series is in powers of a r and a**2 r, so steep slopes start closer
    to the origin.
    """
    return min(START_FRACTION * r_max, 1e-3 / max(a, a * a))


def _series_start(a: float, eps: float):
    b = cubic_coefficient(a)
    return [a * eps + b * eps**3, a + 3.0 * b * eps**2]


def _over(r, y):
    return y[0] - (math.pi + OVERSHOOT_MARGIN)


_over.terminal = True
_over.direction = 1


def _under(r, y):
    return y[0] - 0.5 * math.pi


_under.terminal = True
_under.direction = -1


@dataclass
class ShotResult:
    slope: float
    outcome: Shot
    r_end: float
    terminal: float
    solution: object


def shoot(a: float, r_max: float, dense: bool = False, extend: float = 64.0) -> ShotResult:
    """Integrate the static equation for slope ``a`` and classify the shot.

    A shot that neither crosses pi + 0.01 upward nor falls back through pi/2
    by ``r_max`` is classified by the sign of u' and by u - pi at the end;
    if still ambiguous the integration continues out to ``extend * r_max``.
    """
    if not a > 0:
        raise ValueError("slope must be positive")
    eps = start_radius(a, r_max)
    y0 = _series_start(a, eps)
    r_end = r_max
    start = eps
    state = y0
    while True:
        sol = solve_ivp(_rhs, (start, r_end), state, method="DOP853", rtol=ODE_RTOL,
                        atol=ODE_ATOL, events=(_over, _under), dense_output=dense)
        if sol.status == -1:
            raise IntegrationFailure(f"integration failed for a={a}: {sol.message}")
        if sol.t_events[0].size:
            return ShotResult(a, Shot.OVER, sol.t[-1], sol.y[0, -1], sol)
        if sol.t_events[1].size:
            return ShotResult(a, Shot.UNDER, sol.t[-1], sol.y[0, -1], sol)
        u_end, p_end = sol.y[0, -1], sol.y[1, -1]
        if p_end < 0:
            return ShotResult(a, Shot.UNDER, r_end, u_end, sol)
        if u_end > math.pi:
            return ShotResult(a, Shot.OVER, r_end, u_end, sol)
        if dense or r_end >= extend * r_max:
            return ShotResult(a, Shot.UNDECIDED, r_end, u_end, sol)
        start, state, r_end = r_end, [u_end, p_end], 2.0 * r_end


def find_bracket(r_max: float, lo: float = 1e-3, hi: float = 1e3, n: int = 25):
    """Coarse log-spaced scan for adjacent slopes with opposite outcomes."""
    slopes = np.geomspace(lo, hi, n)
    prev = None
    for a in slopes:
        res = shoot(float(a), r_max)
        if res.outcome is Shot.UNDECIDED:
            prev = None
            continue
        if prev is not None and prev.outcome is Shot.UNDER and res.outcome is Shot.OVER:
            return prev.slope, res.slope
        prev = res
    raise NoBracket(f"no undershoot/overshoot change for slopes in [{lo}, {hi}]")


@dataclass
class StaticProfile:
    slope: float
    r_nodes: np.ndarray
    u: np.ndarray
    u_r: np.ndarray
    Q: float
    energy: float
    r_max: float

    def state(self, t: float = 0.0) -> FieldState:
        grid = make_grid(self.r_max, len(self.r_nodes))
        return FieldState(t, self.u.copy(), np.zeros_like(self.u), grid)

    def evaluate(self, r) -> np.ndarray:
        """Profile at arbitrary radii.

        Linear interpolation between nodes, the regular series below the
        first node and the last value beyond r_max.
        """
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.r_nodes, self.u, right=self.u[-1])
        inner = r < self.r_nodes[0]
        if np.any(inner):
            ri = r[inner]
            out[inner] = self.slope * ri + cubic_coefficient(self.slope) * ri**3
        return out


def solve_static(r_max: float = 50.0, grid_N: int = 8192, tol: float = 1e-10) -> StaticProfile:
    """Bisect on the slope until the bracket has relative width ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    lo, hi = find_bracket(r_max)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        outcome = shoot(mid, r_max).outcome
        if outcome is Shot.UNDER:
            lo = mid
        elif outcome is Shot.OVER:
            hi = mid
        else:
            lo = hi = mid
    a = 0.5 * (lo + hi)
    log.info("static slope a = %.15g", a)
    return sample_profile(a, r_max, grid_N)


def sample_profile(a: float, r_max: float, grid_N: int) -> StaticProfile:
    """Integrate once more with dense output and sample on the cell centres."""
    grid = make_grid(r_max, grid_N)
    eps = start_radius(a, r_max)
    sol = solve_ivp(_rhs, (eps, r_max), _series_start(a, eps), method="DOP853",
                    rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True)
    if sol.status != 0:
        raise IntegrationFailure(sol.message)
    r = grid.r
    u = np.empty_like(r)
    ur = np.empty_like(r)
    inner = r < eps
    b = cubic_coefficient(a)
    u[inner] = a * r[inner] + b * r[inner] ** 3
    ur[inner] = a + 3.0 * b * r[inner] ** 2
    y = sol.sol(r[~inner])
    u[~inner], ur[~inner] = y[0], y[1]
    state = FieldState(0.0, u, np.zeros_like(u), grid)
    energy = energy_slice(state, r_max, ModelKind.ADKINS_NAPPI, u_r=ur).total
    return StaticProfile(slope=a, r_nodes=r.copy(), u=u, u_r=ur,
                         Q=winding_number(state), energy=energy, r_max=r_max)


def static_residual(profile: StaticProfile) -> np.ndarray:
    """u'' + (2/r) u' - N(u, r) by centred differences on interior nodes."""
    r, u = profile.r_nodes, profile.u
    h = r[1] - r[0]
    upp = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    up = (u[2:] - u[:-2]) / (2.0 * h)
    ri = r[1:-1]
    return upp + 2.0 * up / ri - nonlinearity(u[1:-1], ri, ModelKind.ADKINS_NAPPI)


def residual_terms(profile: StaticProfile) -> dict:
    """The individual terms of the static residual on interior nodes."""
    r, u = profile.r_nodes, profile.u
    h = r[1] - r[0]
    ri, ui = r[1:-1], u[1:-1]
    return {
        "u_rr": (u[2:] - 2.0 * ui + u[:-2]) / (h * h),
        "2u_r/r": (u[2:] - u[:-2]) / (h * ri),
        "sin2u/r2": np.sin(2.0 * ui) / ri**2,
        "repulsive": charge_function(ui) * 2.0 * np.sin(ui) ** 2 / ri**4,
    }
