"""Energy, flux and cone functionals of the equivariant evolution.

Convention: every density below is the *unweighted* one (for example
``e = (u_t**2 + u_r**2)/2 + sin(u)**2/r**2 + (u - sin u cos u)**2/(2 r**4)``)
and every integral over a slice or a cone carries the radial weight
``r**2 dr``.  This is the same weight that turns the conservation law

    d/dt [r^2 (u_t^2 + u_r^2)/2 + sin^2 u + (u - sin u cos u)^2/(2 r^2)]
        - d/dr [r^2 u_t u_r] = 0

into the statement E(T) - E(S) = F(T, S).  Wave-map variants simply drop
every term containing ``u - sin u cos u``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from typing import Sequence

import numpy as np

from .fields import FieldState, radial_gradient, radial_integral
from .model import ModelKind, charge_function, potential_I, winding_number

# Relative slack when checking that snapshots cover a requested window.
_COVER_RTOL = 1e-9
_RHS_FLOOR = np.finfo(float).eps


class InsufficientCoverage(ValueError):
    """Snapshots do not span the requested time window."""


# --------------------------------------------------------------------------
# pointwise densities


def state_gradient(state: FieldState) -> np.ndarray:
    return radial_gradient(state.u, state.grid.h)


@dataclass
class _Pointwise:
    """Trig-heavy pointwise quantities of one state, computed once."""

    r: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    ur: np.ndarray
    sin_u: np.ndarray
    sin_2u: np.ndarray
    q: np.ndarray          # u - sin u cos u (zero for the wave map)
    parts: dict
    e: np.ndarray

    @classmethod
    def of(cls, state: FieldState, kind: ModelKind, u_r=None) -> "_Pointwise":
        kind = ModelKind.parse(kind)
        r, u, ut = state.grid.r, state.u, state.v
        ur = state_gradient(state) if u_r is None else u_r
        s, c = np.sin(u), np.cos(u)
        sc = s * c
        q = charge_function(u) if kind.repulsive else np.zeros_like(u)
        r2 = r * r
        parts = {
            "kinetic": 0.5 * ut * ut,
            "gradient": 0.5 * ur * ur,
            "angular": s * s / r2,
            "repulsive": 0.5 * q * q / (r2 * r2),
        }
        e = parts["kinetic"] + parts["gradient"] + parts["angular"] + parts["repulsive"]
        return cls(r, u, ut, ur, s, 2.0 * sc, q, parts, e)


@dataclass
class DensityField:
    e: np.ndarray
    m: np.ndarray


def densities(state: FieldState, kind: ModelKind, u_r=None) -> DensityField:
    """Energy density e and momentum density m = u_r u_t (both unweighted)."""
    pw = _Pointwise.of(state, kind, u_r)
    return DensityField(e=pw.e, m=pw.ur * pw.ut)


# --------------------------------------------------------------------------
# slice energy


@dataclass
class EnergyReport:
    t: float
    r_max: float
    kinetic: float
    gradient: float
    angular: float
    repulsive: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.kinetic + self.gradient + self.angular + self.repulsive


def energy_slice(state: FieldState, r_max: float | None = None,
                 kind: ModelKind = ModelKind.ADKINS_NAPPI, r_min: float = 0.0,
                 u_r=None) -> EnergyReport:
    """Energy of the slice ``r_min <= r <= r_max`` at time ``state.t``.

    With the defaults this is the energy of the whole computational domain.
    """
    grid = state.grid
    if r_max is None:
        r_max = grid.R
    if not (0.0 < r_max <= grid.R * (1 + 1e-12)):
        raise ValueError(f"r_max={r_max} outside (0, {grid.R}]")
    r_max = min(r_max, grid.R)
    parts = _Pointwise.of(state, kind, u_r).parts
    vals = {k: radial_integral(grid.r, f, r_min, r_max) for k, f in parts.items()}
    return EnergyReport(t=state.t, r_max=r_max, **vals)


def cone_radius(state: FieldState) -> float:
    """Radius of the backward light cone through the origin at time t <= 0."""
    return min(abs(state.t), state.grid.R)


def energy_cone(state: FieldState, kind: ModelKind, u_r=None) -> EnergyReport:
    r_max = cone_radius(state)
    if r_max == 0.0:
        return EnergyReport(state.t, 0.0, 0.0, 0.0, 0.0, 0.0)
    return energy_slice(state, r_max, kind, u_r=u_r)


# --------------------------------------------------------------------------
# mantel flux


def flux_density(state: FieldState, kind: ModelKind, u_r=None) -> float:
    """Weighted flux density through the cone mantel r = |t| at time t.

    ``r**2 (u_t - u_r)**2/2 + sin(u)**2 + (u - sin u cos u)**2/(2 r**2)``,
    i.e. the integrand of F(T, S) after the sqrt(2) line element cancels the
    1/sqrt(2) prefactor.  Values at the mantel are linear interpolants in r.
    """
    kind = ModelKind.parse(kind)
    rc = cone_radius(state)
    if rc == 0.0:
        return 0.0
    if u_r is None:
        u_r = state_gradient(state)
    r = state.grid.r
    u = float(np.interp(rc, r, state.u))
    v = float(np.interp(rc, r, state.v))
    ur = float(np.interp(rc, r, u_r))
    out = 0.5 * rc * rc * (v - ur) ** 2 + math.sin(u) ** 2
    if kind.repulsive:
        out += 0.5 * float(charge_function(u)) ** 2 / (rc * rc)
    return out


def _times(snapshots: Sequence[FieldState]) -> np.ndarray:
    t = np.array([s.t for s in snapshots], dtype=float)
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("snapshots must be strictly increasing in time")
    return t


def _check_cover(times: np.ndarray, T: float, S: float):
    slack = _COVER_RTOL * max(1.0, abs(T), abs(S))
    if len(times) < 2 or times[0] > T + slack or times[-1] < S - slack:
        span = (times[0], times[-1]) if len(times) else (None, None)
        raise InsufficientCoverage(f"snapshots span {span}, need [{T}, {S}]")


def integrate_in_time(times, values, T: float, S: float) -> float:
    """Trapezoid rule for a sampled function of t over [T, S].

    Endpoints falling between samples are filled by linear interpolation.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    _check_cover(times, T, S)
    T = max(T, times[0])
    S = min(S, times[-1])
    inside = (times > T) & (times < S)
    x = np.concatenate(([T], times[inside], [S]))
    y = np.concatenate(([np.interp(T, times, values)], values[inside],
                        [np.interp(S, times, values)]))
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def value_at(times, values, T: float) -> float:
    times = np.asarray(times, dtype=float)
    _check_cover(times, T, T)
    return float(np.interp(T, times, values))


def _window(snapshots, T, S):
    """Snapshots needed to integrate over [T, S] (one extra on each side)."""
    times = _times(snapshots)
    _check_cover(times, T, S)
    lo = max(int(np.searchsorted(times, T, side="right")) - 1, 0)
    hi = min(int(np.searchsorted(times, S, side="left")) + 1, len(times))
    return list(snapshots[lo:hi]), times[lo:hi]


def flux_cone(snapshots: Sequence[FieldState], T: float, S: float,
              kind: ModelKind = ModelKind.ADKINS_NAPPI) -> float:
    """Flux F(T, S) through the mantel of the backward cone between T and S."""
    if not T < S:
        raise ValueError("need T < S")
    snaps, times = _window(snapshots, T, S)
    dens = [flux_density(s, kind) for s in snaps]
    return integrate_in_time(times, dens, T, S)


def energy_flux_residuals(snapshots: Sequence[FieldState], kind: ModelKind):
    """Per-snapshot balance quantity B(t) = E_cone(t) + F(t_0, t).

    E(T) - E(S) - F(T, S) = B(T) - B(S) for every pair of snapshots, so the
    worst pair is ``B.max() - B.min()``.  Returns (times, E_cone, F_cum, B).
    """
    times = _times(snapshots)
    E = np.array([energy_cone(s, kind).total for s in snapshots])
    g = np.array([flux_density(s, kind) for s in snapshots])
    F = np.concatenate(([0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(times))))
    return times, E, F, E + F


# --------------------------------------------------------------------------
# differential identities


IDENTITIES = ("e1", "e2", "e3", "e4", "e5")


def identity_terms(which: str, t: float, r, u, ut, ur, kind: ModelKind):
    """(P, Q, G) with dP/dt - dQ/dr = G for the chosen identity."""
    kind = ModelKind.parse(kind)
    rep = kind.repulsive
    ch = charge_function(u) if rep else 0.0
    s2 = np.sin(u) ** 2
    r2 = r * r
    kin = ut * ut + ur * ur
    ch2 = ch * ch if rep else 0.0
    energy = 0.5 * r2 * kin + s2 + (0.5 * ch2 / r2 if rep else 0.0)
    if which == "e1":
        return energy, r2 * ut * ur, np.zeros_like(r)
    if which == "e2":
        P = r2 * ut * ur
        Q = 0.5 * r2 * kin - s2 - (0.5 * ch2 / r2 if rep else 0.0)
        G = r * (ur * ur - ut * ut) - (ch2 / r**3 if rep else 0.0)
        return P, Q, G
    if which == "e3":
        P = r2 * r * ut * ur
        Q = 0.5 * r2 * r * kin - r * s2 - (0.5 * ch2 / r if rep else 0.0)
        G = 0.5 * r2 * (ur * ur - 3.0 * ut * ut) + s2 - (0.5 * ch2 / r2 if rep else 0.0)
        return P, Q, G
    if which == "e4":
        P = r2 * u * ut
        Q = r2 * u * ur
        force = np.sin(2.0 * u) + (ch * 2.0 * s2 / r2 if rep else 0.0)
        G = r2 * (ut * ut - ur * ur) - u * force
        return P, Q, G
    if which == "e5":
        return t * energy, t * r2 * ut * ur, energy
    raise ValueError(f"unknown identity {which!r}; choose from {IDENTITIES}")


def identity_residual(snapshots: Sequence[FieldState], which: str,
                      kind: ModelKind):
    """Residual dP/dt - dQ/dr - G of a differential identity.

    Centred differences on the middle of three consecutive, equally spaced
    snapshots.  Returns ``(r, residual, l2_norm)`` restricted to
    ``2h <= r <= R - 2h``.
    """
    if len(snapshots) < 3:
        raise ValueError("need at least three snapshots")
    mid = len(snapshots) // 2
    prev, cur, nxt = snapshots[mid - 1], snapshots[mid], snapshots[mid + 1]
    d1, d2 = cur.t - prev.t, nxt.t - cur.t
    if not math.isclose(d1, d2, rel_tol=1e-9, abs_tol=0.0) or d1 <= 0:
        raise ValueError("snapshots must be equally spaced in time")
    grid = cur.grid
    r, h = grid.r, grid.h

    def terms(s):
        return identity_terms(which, s.t, r, s.u, s.v, state_gradient(s), kind)

    P_prev, _, _ = terms(prev)
    P_next, _, _ = terms(nxt)
    _, Q, G = terms(cur)
    res = np.full(grid.N, np.nan)
    res[1:-1] = ((P_next - P_prev)[1:-1] / (d1 + d2)
                 - (Q[2:] - Q[:-2]) / (2.0 * h) - G[1:-1])
    keep = (r >= 2.0 * h) & (r <= grid.R - 2.0 * h)
    res = res[keep]
    return r[keep], res, float(np.sqrt(h * np.sum(res * res)))


# --------------------------------------------------------------------------
# cone functionals


@dataclass
class ConeReport:
    T: float
    t_last: float
    ie3: float
    ie4: float
    ie5: float
    eq_non: float
    h2: float
    annular: float


def _slice_integrals(state: FieldState, kind: ModelKind, lam: float, u_r=None,
                     pw: _Pointwise | None = None) -> dict:
    """All slice integrals over B_t needed by the cone functionals."""
    out = dict.fromkeys(("k3", "k4", "k5", "E", "X", "h2", "annular"), 0.0)
    rc = cone_radius(state)
    if rc == 0.0:
        return out
    if pw is None:
        pw = _Pointwise.of(state, kind, u_r)
    r, u, ut, ur = pw.r, pw.u, pw.ut, pw.ur
    rep = pw.parts["repulsive"]
    push = u * pw.q * 2.0 * pw.sin_u**2 / r**4

    def I(f, a=0.0):
        return radial_integral(r, f, a, rc)

    out["k3"] = I(0.5 * (3.0 * ut * ut - ur * ur) + rep)
    out["k4"] = I(ur * ur - ut * ut + push)
    out["k5"] = I(-0.5 * (ut * ut + ur * ur) - rep)
    out["E"] = I(pw.e)
    out["X"] = I(r * ur * ut)
    out["h2"] = I(2.0 * rep)
    out["annular"] = I(pw.e, lam * rc)
    return out


def eq_non_direct(state: FieldState, kind: ModelKind, u_r=None) -> float:
    """E(T) - (1/|T|) * integral over B_T of r u_r u_t."""
    rc = cone_radius(state)
    if rc == 0.0:
        return 0.0
    s = _slice_integrals(state, kind, 1.0, u_r)
    return s["E"] - s["X"] / rc


def eq_non_decomposed(state: FieldState, kind: ModelKind, u_r=None) -> float:
    """The same quantity written as a sum of manifestly nonnegative pieces.

    With rho = r/|T| in [0, 1]:
        (1 + rho)(u_t - u_r)^2/4 + (1 - rho)(u_t + u_r)^2/4
        + sin^2 u / r^2 + (u - sin u cos u)^2 / (2 r^4)
    """
    rc = cone_radius(state)
    if rc == 0.0:
        return 0.0
    r = state.grid.r
    u, ut = state.u, state.v
    ur = state_gradient(state) if u_r is None else u_r
    parts = decomposition_terms(r, u, ut, ur, rc, kind)
    return sum(radial_integral(r, f, 0.0, rc) for f in parts)


def decomposition_terms(r, u, ut, ur, rc, kind):
    kind = ModelKind.parse(kind)
    rho = r / rc
    parts = [0.25 * (1.0 + rho) * (ut - ur) ** 2,
             0.25 * (1.0 - rho) * (ut + ur) ** 2,
             np.sin(u) ** 2 / r**2]
    if kind.repulsive:
        parts.append(0.5 * charge_function(u) ** 2 / r**4)
    return parts


def cone_functionals(snapshots: Sequence[FieldState], T: float, lam: float = 0.5,
                     kind: ModelKind = ModelKind.ADKINS_NAPPI) -> ConeReport:
    """Cone averages over K_T^{t_last} and slice functionals on B_T.

    The cone integrals stop at the last available snapshot time ``t_last``
    (the report carries it); slice quantities at T are linearly interpolated
    in time between the bracketing snapshots.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if T >= 0:
        raise ValueError("report time must be negative")
    times = _times(snapshots)
    t_last = float(times[-1])
    if t_last <= T:
        raise InsufficientCoverage(f"no snapshots after T={T}")
    snaps, tw = _window(snapshots, T, t_last)
    rows = [_slice_integrals(s, kind, lam) for s in snaps]
    col = {k: np.array([row[k] for row in rows]) for k in rows[0]}
    aT = abs(T)

    def cone(key):
        return integrate_in_time(tw, col[key], T, t_last) / aT

    E_T = value_at(tw, col["E"], T)
    X_T = value_at(tw, col["X"], T)
    return ConeReport(
        T=T,
        t_last=t_last,
        ie3=cone("k3") - X_T / aT,
        ie4=cone("k4"),
        ie5=cone("k5") + E_T,
        eq_non=E_T - X_T / aT,
        h2=value_at(tw, col["h2"], T),
        annular=value_at(tw, col["annular"], T),
    )


def cone_integral(snapshots: Sequence[FieldState], density, T: float, S: float,
                  power: int = 2) -> float:
    """Integral of ``density(state) * r**power`` over the truncated cone K_T^S.

    A density carrying an explicit 1/r**2 is better passed without it and
    with ``power=0``; the radial quadrature interpolates the density linearly.
    """
    snaps, tw = _window(snapshots, T, S)
    vals = []
    for s in snaps:
        rc = cone_radius(s)
        vals.append(radial_integral(s.grid.r, density(s), 0.0, rc, power) if rc > 0 else 0.0)
    return integrate_in_time(tw, vals, T, S)


# --------------------------------------------------------------------------
# pointwise estimate


def pointwise_estimate_check(state: FieldState, kind: ModelKind, u_r=None,
                             r_max: float | None = None, pw: _Pointwise | None = None):
    """Compare ((r^2 m)_t - (r^2 e)_r)^2 against r^2 (e - m)(e + m).

    The left side uses the closed form obtained from the e2 identity:
        r (u_r^2 - u_t^2) + q^2/r^3 - 2 sin(2u) u_r - 2 q (1 - cos 2u) u_r / r^2
    with q = u - sin u cos u (the two q terms are dropped for the wave map).
    Returns ``(lhs, rhs, ratio_sup)``; the right side is floored at machine
    epsilon before dividing.
    """
    if pw is None:
        pw = _Pointwise.of(state, kind, u_r)
    r, ut, ur, q = pw.r, pw.ut, pw.ur, pw.q
    core = (r * (ur * ur - ut * ut) - 2.0 * pw.sin_2u * ur
            + q * q / r**3 - 4.0 * q * pw.sin_u**2 * ur / r**2)
    lhs = core * core
    m = ur * ut
    rhs = r * r * (pw.e - m) * (pw.e + m)
    ratio = lhs / np.maximum(rhs, _RHS_FLOOR)
    if r_max is not None:
        ratio = ratio[r <= r_max]
    ratio_sup = float(np.max(ratio)) if ratio.size else 0.0
    return lhs, rhs, ratio_sup


# --------------------------------------------------------------------------
# mantel values


def boundary_vanishing_check(snapshots: Sequence[FieldState]):
    """u on the mantel r = |t| and I(u) there, one entry per snapshot."""
    times = _times(snapshots)
    if len(times) == 0:
        raise InsufficientCoverage("no snapshots")
    vals = []
    for s in snapshots:
        rc = abs(s.t)
        if rc > s.grid.R or s.t > 0:
            raise InsufficientCoverage(f"mantel at t={s.t} lies outside the grid")
        vals.append(float(np.interp(rc, s.grid.r, s.u)) if rc > 0 else 0.0)
    vals = np.array(vals)
    return times, vals, potential_I(vals)


# --------------------------------------------------------------------------
# per-step series


@dataclass
class DiagnosticRow:
    t: float
    dt: float
    E_total: float
    E_cone: float
    E_kin: float
    E_grad: float
    E_ang: float
    E_rep: float
    flux_cum: float
    sup_u: float
    sup_ur: float
    Q: float
    h2: float
    eq_non: float
    annular_lambda: float
    els_ratio: float


CSV_COLUMNS = tuple(f.name for f in fields(DiagnosticRow))


def measure(state: FieldState, kind: ModelKind, dt: float, flux_cum: float,
            lam: float, u_r=None) -> DiagnosticRow:
    """Evaluate one DiagnosticRow; cone quantities use r <= |t|."""
    pw = _Pointwise.of(state, kind, u_r)
    r, R = pw.r, state.grid.R
    E_total = sum(radial_integral(r, f, 0.0, R) for f in pw.parts.values())
    rc = cone_radius(state)
    cone = {k: (radial_integral(r, f, 0.0, rc) if rc > 0 else 0.0)
            for k, f in pw.parts.items()}
    sl = _slice_integrals(state, kind, lam, pw=pw)
    _, _, els = pointwise_estimate_check(state, kind, pw=pw)
    return DiagnosticRow(
        t=state.t, dt=dt, E_total=E_total, E_cone=sum(cone.values()),
        E_kin=cone["kinetic"], E_grad=cone["gradient"], E_ang=cone["angular"],
        E_rep=cone["repulsive"], flux_cum=flux_cum,
        sup_u=float(np.max(np.abs(pw.u))), sup_ur=float(np.max(np.abs(pw.ur))),
        Q=winding_number(state), h2=sl["h2"],
        eq_non=(sl["E"] - sl["X"] / rc) if rc > 0 else 0.0,
        annular_lambda=sl["annular"], els_ratio=els,
    )


@dataclass
class DiagnosticSeries:
    rows: list = field(default_factory=list)

    def append(self, row: DiagnosticRow):
        if self.rows and not row.t > self.rows[-1].t:
            raise ValueError("diagnostic rows must increase in time")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.rows:
                w.writerow([format(x, ".17g") for x in astuple(row)])

    @classmethod
    def read_csv(cls, path) -> "DiagnosticSeries":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_COLUMNS:
                raise ValueError(f"unexpected CSV header {header}")
            rows = [DiagnosticRow(*map(float, rec)) for rec in reader if rec]
        return cls(rows)
