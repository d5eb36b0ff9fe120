"""Radial mesh, field state and the small numerical kernels shared by the
solver and the diagnostics (gradients, weighted radial quadrature)."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

MIN_CELLS = 8


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred mesh on [0, R]: r_j = (j + 1/2) h, never touching r = 0."""

    R: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.R) or self.R <= 0:
            raise ValueError(f"outer radius must be positive, got {self.R}")
        if int(self.N) != self.N or self.N < MIN_CELLS:
            raise ValueError(f"need at least {MIN_CELLS} cells, got {self.N}")

    @property
    def h(self) -> float:
        return self.R / self.N

    @cached_property
    def r(self) -> np.ndarray:
        r = (np.arange(self.N) + 0.5) * self.h
        r.flags.writeable = False
        return r

    @cached_property
    def faces(self) -> np.ndarray:
        """Face radii r_{j-1/2}, j = 0..N (first is 0, last is R)."""
        f = np.arange(self.N + 1) * self.h
        f.flags.writeable = False
        return f


def make_grid(R: float, N: int) -> RadialGrid:
    return RadialGrid(float(R), int(N))


@dataclass
class FieldState:
    """(u, u_t) sampled on a grid at time t."""

    t: float
    u: np.ndarray
    v: np.ndarray
    grid: RadialGrid = field(repr=False)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        n = self.grid.N
        if self.u.shape != (n,) or self.v.shape != (n,):
            raise ValueError(f"state arrays must have shape ({n},)")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.u.copy(), self.v.copy(), self.grid)


def radial_gradient(u: np.ndarray, h: float, outer_ghost: float | None = None) -> np.ndarray:
    """Centred first derivative on the cell-centred grid.

    The inner ghost is the odd reflection ``u_{-1} = -u_0``.  Without an
    explicit outer ghost the last cell uses a one-sided second-order formula.
    """
    u = np.asarray(u, dtype=float)
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    du[0] = (u[1] + u[0]) / (2.0 * h)
    if outer_ghost is None:
        du[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    else:
        du[-1] = (outer_ghost - u[-2]) / (2.0 * h)
    return du


def _linear_at(r: np.ndarray, f: np.ndarray, x: float) -> float:
    """Piecewise-linear interpolant of (r, f), extended linearly past the ends."""
    if x <= r[0]:
        j = 0
    elif x >= r[-1]:
        j = len(r) - 2
    else:
        j = int(np.searchsorted(r, x)) - 1
    w = (x - r[j]) / (r[j + 1] - r[j])
    return float(f[j] + w * (f[j + 1] - f[j]))


def _piece_weights(x0, x1, power):
    """Weights (left, right) with int_{x0}^{x1} r**p f = left*f(x0) + right*f(x1)
    for f linear on the interval."""
    dx = x1 - x0
    p = power
    m_p = (x1 ** (p + 1) - x0 ** (p + 1)) / (p + 1)
    m_p1 = (x1 ** (p + 2) - x0 ** (p + 2)) / (p + 2)
    return (x1 * m_p - m_p1) / dx, (m_p1 - x0 * m_p) / dx


@lru_cache(maxsize=32)
def _node_weights(key):
    n, r0, r_last, power = key
    r = np.linspace(r0, r_last, n)
    left, right = _piece_weights(r[:-1], r[1:], power)
    return r, left, right


def _weights_for(r: np.ndarray, power: int):
    n = len(r)
    key = (n, float(r[0]), float(r[-1]), power)
    cached, left, right = _node_weights(key)
    # grids here are uniform; anything else gets weights computed afresh
    tol = 1e-12 * max(1.0, abs(key[2]))
    if abs(cached[n // 2] - r[n // 2]) > tol or abs(cached[1] - r[1]) > tol:
        left, right = _piece_weights(r[:-1], r[1:], power)
    return left, right


def radial_integral(r: np.ndarray, f: np.ndarray, a: float, b: float, power: int = 2) -> float:
    """Integrate ``r**power * f(r)`` over [a, b].

    ``f`` is replaced by its piecewise-linear interpolant through the nodes
    (extended linearly beyond the first and last node), and the product with
    the weight is integrated exactly.  This is the trapezoid rule taken
    against the radial measure rather than against dr, so densities that are
    linear in r integrate without error.
    """
    if b < a:
        raise ValueError("integration bounds out of order")
    if b == a:
        return 0.0
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    # nodes strictly inside (a, b)
    lo = int(np.searchsorted(r, a, side="right"))
    hi = int(np.searchsorted(r, b, side="left"))
    fa = _linear_at(r, f, a)
    fb = _linear_at(r, f, b)
    if hi <= lo:
        wl, wr = _piece_weights(a, b, power)
        return float(wl * fa + wr * fb)
    left, right = _weights_for(r, power)
    total = float(np.dot(left[lo:hi - 1], f[lo:hi - 1]) + np.dot(right[lo:hi - 1], f[lo + 1:hi]))
    if r[lo] > a:
        wl, wr = _piece_weights(a, r[lo], power)
        total += wl * fa + wr * f[lo]
    if b > r[hi - 1]:
        wl, wr = _piece_weights(r[hi - 1], b, power)
        total += wl * f[hi - 1] + wr * fb
    return float(total)
