"""Nonlinearities and closed-form pieces of the equivariant field equations.

Both models share the radial wave operator

    u_tt = u_rr + (2/r) u_r - N(u, r)

and differ only in N.  The wave map keeps ``sin(2u)/r**2``; the Adkins-Nappi
model adds the repulsive term ``(u - sin u cos u)(1 - cos 2u)/r**4`` coming
from the eliminated gauge potential.  The coupling constant is scaled to one.
"""
from __future__ import annotations

import enum

import numpy as np


class ModelKind(enum.Enum):
    WAVE_MAP = "wavemap"
    ADKINS_NAPPI = "adkins_nappi"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"wavemap": cls.WAVE_MAP, "wave_map": cls.WAVE_MAP,
                   "adkins_nappi": cls.ADKINS_NAPPI, "an": cls.ADKINS_NAPPI}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown model {value!r}") from None

    @property
    def repulsive(self) -> bool:
        return self is ModelKind.ADKINS_NAPPI


# u - sin u cos u = sum_k (-1)**(k+1) 2**(2k) u**(2k+1) / (2k+1)!, k >= 1.
# Four terms leave a relative remainder below 1e-16 for |u| < 1e-2.
_SERIES_CUTOFF = 1e-2
_SERIES_COEFFS = (2.0 / 3.0, -2.0 / 15.0, 4.0 / 315.0, -2.0 / 2835.0)


def _series_fix(u, out):
    small = np.abs(u) < _SERIES_CUTOFF
    if np.any(small):
        us = u[small]
        u2 = us * us
        c0, c1, c2, c3 = _SERIES_COEFFS
        out[small] = us * u2 * (c0 + u2 * (c1 + u2 * (c2 + u2 * c3)))
    return out


def charge_function(u):
    """Return ``u - sin(u) cos(u)``, evaluated without cancellation near 0.

    This is the antiderivative of ``2 sin(u)**2``, so ``charge_function(u)/pi``
    is the baryon charge enclosed inside a sphere on which the profile
    takes the value ``u``.
    """
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = _series_fix(u, u - 0.5 * np.sin(2.0 * u))
    return float(out[0]) if scalar else out


def repulsive_term(u, r):
    """(u - sin u cos u)(1 - cos 2u) / r**4, with 1 - cos 2u as 2 sin(u)**2."""
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    out = charge_function(u) * 2.0 * np.sin(u) ** 2 / r**4
    return out if np.ndim(out) else float(out)


def nonlinearity(u, r, kind: ModelKind):
    """N(u, r) such that u_tt = u_rr + (2/r) u_r - N(u, r)."""
    kind = ModelKind.parse(kind)
    scalar = np.ndim(u) == 0 and np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("nonlinearity is only defined for r > 0")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    s, c = np.sin(u), np.cos(u)
    sc = s * c
    r2 = r * r
    out = 2.0 * sc / r2
    if kind.repulsive:
        q = _series_fix(u, u - sc)
        out = out + q * 2.0 * s * s / (r2 * r2)
    return float(out[0]) if scalar else out


# (z**2 - sin(z)**2)/2 = z**4/6 - z**6/45 + z**8/630 - z**10/14175 + z**12/467775 - ...
_I_CUTOFF = 5e-2
_I_COEFFS = (1.0 / 6.0, -1.0 / 45.0, 1.0 / 630.0, -1.0 / 14175.0, 1.0 / 467775.0)


def potential_I(z):
    """I(z) = (z**2 - sin(z)**2)/2, the integral of w - sin w cos w from 0 to z.

    Written as (z - sin z)(z + sin z)/2, with a series for small |z| where
    z - sin z cancels.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    s = np.sin(z)
    out = 0.5 * (z - s) * (z + s)
    small = np.abs(z) < _I_CUTOFF
    if np.any(small):
        z2 = z[small] ** 2
        acc = np.zeros_like(z2)
        for c in reversed(_I_COEFFS):
            acc = c + z2 * acc
        out[small] = z2 * z2 * acc
    return float(out[0]) if scalar else out


def turok_spergel(t, r, T0=0.0):
    """Exact self-similar wave map ``u = 2 arctan(r/(T0 - t))``.

    Returns ``(u, u_t, u_r)``.  Raises ``ValueError`` at or past the blowup
    time ``T0``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t >= T0):
        raise ValueError(f"Turok-Spergel solution is singular for t >= T0={T0}")
    r = np.asarray(r, dtype=float)
    tau = T0 - t
    denom = tau * tau + r * r
    u = 2.0 * np.arctan(r / tau)
    u_t = 2.0 * r / denom
    u_r = 2.0 * tau / denom
    if u.ndim == 0:
        return float(u), float(u_t), float(u_r)
    return u, u_t, u_r


def turok_spergel_utt(t, r, T0=0.0):
    """Exact second time derivative of the Turok-Spergel solution."""
    tau = T0 - np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    return 4.0 * r * tau / (tau * tau + r * r) ** 2


def winding_number(state) -> float:
    """Degree of the equivariant map, ``(1/pi)(u - sin u cos u)`` at r = R.

    The inner endpoint contributes nothing because u(0) = 0.  The profile is
    extrapolated linearly from the last two cells to the outer radius.
    """
    u = np.asarray(state.u)
    u_outer = u[-1] + 0.5 * (u[-1] - u[-2])
    return float(charge_function(u_outer) / np.pi)


def gauge_potential(state) -> np.ndarray:
    """Reconstruct the time component V of the gauge field on the grid.

    Solves r V_r + (u - sin u cos u)/r = 0 with V = 0 at the outer radius by
    trapezoid quadrature inward from R.
    """
    grid = state.grid
    r = grid.r
    u = np.asarray(state.u)
    g = charge_function(u) / r**2
    u_outer = u[-1] + 0.5 * (u[-1] - u[-2])
    g_outer = charge_function(u_outer) / grid.R**2

    V = np.empty_like(g)
    V[-1] = 0.25 * grid.h * (g[-1] + g_outer)
    # cumulative trapezoid from the last node inward
    pieces = 0.5 * grid.h * (g[1:] + g[:-1])
    V[:-1] = V[-1] + np.cumsum(pieces[::-1])[::-1]
    return V
