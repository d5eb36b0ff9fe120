"""Method-of-lines evolution of u_tt = u_rr + (2/r) u_r - N(u, r)."""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import diagnostics
from .fields import FieldState, RadialGrid, make_grid, radial_gradient
from .model import ModelKind, nonlinearity, turok_spergel

log = logging.getLogger(__name__)

__all__ = [
    "OuterBC", "SolverConfig", "BlowupEvent", "EvolutionResult",
    "InstabilityError", "make_grid", "initial_data", "rhs", "step", "evolve",
]


@dataclass(frozen=True)
class OuterBC:
    """Outer boundary condition at r = R.

    kind is one of ``dirichlet_constant`` (uses ``value``), ``dirichlet_exact``
    (Turok-Spergel with blowup time ``T0``) or ``outgoing``.
    """

    kind: str = "dirichlet_constant"
    value: float = math.pi
    T0: float = 0.0

    KINDS = ("dirichlet_constant", "dirichlet_exact", "outgoing")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown outer boundary {self.kind!r}")

    @classmethod
    def constant(cls, value=math.pi):
        return cls("dirichlet_constant", value=float(value))

    @classmethod
    def exact(cls, T0=0.0):
        return cls("dirichlet_exact", T0=float(T0))

    @classmethod
    def outgoing(cls):
        return cls("outgoing")

    def ghost(self, t: float, u: np.ndarray, v: np.ndarray, grid: RadialGrid) -> float:
        """Value of u in the ghost cell at r = R + h/2."""
        if self.kind == "dirichlet_constant":
            return 2.0 * self.value - u[-1]
        if self.kind == "dirichlet_exact":
            tau = self.T0 - t
            if tau < 0:
                raise ValueError(f"exact boundary data ends at T0={self.T0}, asked for t={t}")
            # atan2 keeps the face value finite (= pi) at t = T0 itself
            return 4.0 * math.atan2(grid.R, tau) - u[-1]
        # Sommerfeld: u_t + u_r + (u - pi)/r = 0 at the face r = R
        h, R = grid.h, grid.R
        v_face = 1.5 * v[-1] - 0.5 * v[-2]
        rhs_ = -v_face + u[-1] / h - (0.5 * u[-1] - math.pi) / R
        return rhs_ / (1.0 / h + 0.5 / R)


@dataclass
class SolverConfig:
    model: ModelKind
    grid: RadialGrid
    cfl: float = 0.5
    t_start: float = -1.0
    t_end: float = 0.0
    outer_bc: OuterBC = field(default_factory=OuterBC)
    # None means 1e3 times the sup of |u_r| in the initial data
    blowup_gradient_threshold: Optional[float] = None
    snapshot_stride: int = 10
    diagnostic_stride: int = 1
    annular_lambda: float = 0.5

    def __post_init__(self):
        self.model = ModelKind.parse(self.model)
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_start < self.t_end:
            raise ValueError("t_start must precede t_end")
        if self.outer_bc.kind == "dirichlet_exact" and self.t_end > self.outer_bc.T0:
            raise ValueError("exact boundary data needs t_end <= T0")
        if self.blowup_gradient_threshold is not None and self.blowup_gradient_threshold <= 0:
            raise ValueError("blowup threshold must be positive")
        if self.snapshot_stride < 1 or self.diagnostic_stride < 1:
            raise ValueError("strides must be positive integers")
        if not 0.0 <= self.annular_lambda <= 1.0:
            raise ValueError("annular lambda must lie in [0, 1]")

    @property
    def dt(self) -> float:
        return self.cfl * self.grid.h


@dataclass
class BlowupEvent:
    t_detect: float
    sup_gradient: float
    r_star: float


class InstabilityError(RuntimeError):
    """Non-finite values appeared; carries the last finite state."""

    def __init__(self, message, last_state=None, result=None):
        super().__init__(message)
        self.last_state = last_state
        self.result = result


@dataclass
class EvolutionResult:
    series: diagnostics.DiagnosticSeries
    snapshots: list
    event: Optional[BlowupEvent]
    final: FieldState


# --------------------------------------------------------------------------
# initial data


def initial_data(family: str, params: dict, grid: RadialGrid, t_start: float = -1.0) -> FieldState:
    """Build the state at ``t_start`` for one of the supported families.

    ``turok_spergel``  params: T0
    ``gaussian``       params: sigma, p   (u = pi (1 - exp(-(r/sigma)**p)))
    ``static``         params: profile (StaticProfile), lam
    """
    family = family.lower()
    params = dict(params or {})
    r = grid.r
    if family in ("turok_spergel", "ts"):
        T0 = float(params.pop("T0", 0.0))
        _reject_extra(family, params)
        if not T0 > t_start:
            raise ValueError("Turok-Spergel data needs T0 > t_start")
        u, ut, _ = turok_spergel(t_start, r, T0)
        return FieldState(t_start, u, ut, grid)
    if family in ("gaussian", "gaussian_lump"):
        sigma = float(params.pop("sigma", 0.5))
        p = float(params.pop("p", 2.0))
        _reject_extra(family, params)
        if sigma <= 0 or p <= 0:
            raise ValueError("gaussian lump needs sigma > 0 and p > 0")
        u = math.pi * -np.expm1(-((r / sigma) ** p))
        return FieldState(t_start, u, np.zeros_like(u), grid)
    if family in ("static", "rescaled_static"):
        profile = params.pop("profile", None)
        lam = float(params.pop("lam", 1.0))
        _reject_extra(family, params)
        if profile is None or lam <= 0:
            raise ValueError("rescaled static data needs a profile and lam > 0")
        u = profile.evaluate(r / lam)
        return FieldState(t_start, u, np.zeros_like(u), grid)
    raise ValueError(f"unknown initial-data family {family!r}")


def _reject_extra(family, params):
    if params:
        raise ValueError(f"unexpected parameters for {family}: {sorted(params)}")


# --------------------------------------------------------------------------
# spatial operator


def laplacian(u: np.ndarray, grid: RadialGrid, outer_ghost: float) -> np.ndarray:
    """Conservative u_rr + (2/r) u_r = (r^2 u_r)_r / r^2 on the cell centres.

    The face at r = 0 has zero weight, so the inner odd-reflection ghost
    drops out of the stencil; it is still what makes the first cell exact
    for u linear in r.
    """
    h = grid.h
    r = grid.r
    faces = grid.faces
    ext = np.empty(grid.N + 2)
    ext[0] = -u[0]
    ext[1:-1] = u
    ext[-1] = outer_ghost
    flux = faces**2 * np.diff(ext) / h
    return np.diff(flux) / (r * r * h)


def rhs(state: FieldState, kind: ModelKind, bc: OuterBC):
    """Time derivative (du, dv) of the first-order system."""
    grid = state.grid
    ghost = bc.ghost(state.t, state.u, state.v, grid)
    dv = laplacian(state.u, grid, ghost) - nonlinearity(state.u, grid.r, kind)
    return state.v.copy(), dv


def step(state: FieldState, dt: float, kind: ModelKind, bc: OuterBC) -> FieldState:
    """One classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    t, g = state.t, state.grid

    def f(tt, u, v):
        return rhs(FieldState(tt, u, v, g), kind, bc)

    u0, v0 = state.u, state.v
    # overflow is reported below as an InstabilityError, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        k1u, k1v = f(t, u0, v0)
        k2u, k2v = f(t + 0.5 * dt, u0 + 0.5 * dt * k1u, v0 + 0.5 * dt * k1v)
        k3u, k3v = f(t + 0.5 * dt, u0 + 0.5 * dt * k2u, v0 + 0.5 * dt * k2v)
        k4u, k4v = f(t + dt, u0 + dt * k3u, v0 + dt * k3v)
        u1 = u0 + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v1 = v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    out = FieldState(t + dt, u1, v1, g)
    if not out.is_finite():
        raise InstabilityError(f"non-finite values after step to t={t + dt}", last_state=state)
    return out


# --------------------------------------------------------------------------
# driver


def _gradient(state: FieldState, bc: OuterBC) -> np.ndarray:
    ghost = bc.ghost(state.t, state.u, state.v, state.grid)
    return radial_gradient(state.u, state.grid.h, outer_ghost=ghost)


class _SlopeMonitor:
    """Warns when |u(r_0)|/r_0 jumps above ten times its recent median."""

    def __init__(self, window=101):
        self.history = deque(maxlen=window)
        self.warned = False

    def __call__(self, state: FieldState):
        slope = abs(state.u[0]) / state.grid.r[0]
        if len(self.history) >= 10 and not self.warned:
            med = float(np.median(self.history))
            if med > 0 and slope > 10.0 * med:
                log.warning("near-origin slope %.3g exceeds 10x running median %.3g at t=%.6g",
                            slope, med, state.t)
                self.warned = True
        self.history.append(slope)


def evolve(config: SolverConfig, data: FieldState,
           on_snapshot: Callable[[FieldState], None] | None = None) -> EvolutionResult:
    """Advance ``data`` to ``config.t_end`` with dt = cfl * h.

    Stops early with a BlowupEvent once sup |u_r| reaches the threshold.
    Non-finite values raise InstabilityError carrying the last valid state
    and everything recorded so far.  A state later than ``config.t_start``
    (for example from a checkpoint) is continued from its own time.
    """
    if data.grid != config.grid:
        raise ValueError("initial data lives on a different grid")
    if not data.is_finite():
        raise InstabilityError("initial data is not finite", last_state=None)
    kind, bc = config.model, config.outer_bc
    dt_nominal = config.dt
    lam = config.annular_lambda

    state = data.copy()
    u_r = _gradient(state, bc)
    threshold = config.blowup_gradient_threshold
    if threshold is None:
        threshold = 1e3 * max(float(np.max(np.abs(u_r))), np.finfo(float).tiny)

    series = diagnostics.DiagnosticSeries()
    snapshots = [state.copy()]
    if on_snapshot:
        on_snapshot(snapshots[-1])
    flux_cum = 0.0
    g_prev = diagnostics.flux_density(state, kind, u_r)
    t_prev_row = state.t
    series.append(diagnostics.measure(state, kind, 0.0, flux_cum, lam, u_r))
    monitor = _SlopeMonitor()
    monitor(state)
    result = EvolutionResult(series, snapshots, None, state)

    t0 = state.t
    n = 0
    event = None
    while state.t < config.t_end:
        # time from a step count, so long runs do not accumulate drift
        t_next = min(t0 + (n + 1) * dt_nominal, config.t_end)
        if config.t_end - t_next < 1e-9 * dt_nominal:
            t_next = config.t_end
        dt = t_next - state.t
        try:
            new = step(state, dt, kind, bc)
        except InstabilityError as err:
            err.result = result
            raise
        new.t = t_next
        n += 1
        state = new
        monitor(state)
        u_r = _gradient(state, bc)
        sup_ur = float(np.max(np.abs(u_r)))
        done = state.t >= config.t_end
        blown = sup_ur >= threshold
        if blown:
            j = int(np.argmax(np.abs(u_r)))
            event = BlowupEvent(state.t, sup_ur, float(state.grid.r[j]))
        if blown or done or n % config.diagnostic_stride == 0:
            g = diagnostics.flux_density(state, kind, u_r)
            flux_cum += 0.5 * (g + g_prev) * (state.t - t_prev_row)
            g_prev, t_prev_row = g, state.t
            series.append(diagnostics.measure(state, kind, dt, flux_cum, lam, u_r))
        if blown or done or n % config.snapshot_stride == 0:
            snapshots.append(state.copy())
            if on_snapshot:
                on_snapshot(snapshots[-1])
        result.final = state
        if blown:
            log.info("blowup detected at t=%.6g (sup|u_r|=%.4g at r=%.4g)",
                     event.t_detect, event.sup_gradient, event.r_star)
            break
    result.event = event
    return result


def resume(config: SolverConfig, state: FieldState, **kwargs) -> EvolutionResult:
    """Continue an evolution from a checkpointed state."""
    if state.t >= config.t_end:
        raise ValueError("checkpoint is already at or past t_end")
    return evolve(replace(config, t_start=state.t), state, **kwargs)
