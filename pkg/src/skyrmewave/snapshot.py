"""Plain-text snapshot and checkpoint records.

A record is a block of ``# key = value`` header lines followed by a
``r u v`` column header and one row per cell.  Floats are written with 17
significant digits, which reproduces every double exactly on reading.
"""
from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np

from .fields import FieldState, make_grid
from .model import ModelKind
from .solver import OuterBC, SolverConfig

SCHEMA_VERSION = 1
MAGIC = "skyrmewave-snapshot"
_COLUMNS = "r u v"


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_snapshot(path, state: FieldState, model, extra: dict | None = None) -> Path:
    """Write ``state`` to ``path``; ``extra`` adds further header entries."""
    model = ModelKind.parse(model)
    g = state.grid
    head = {"schema": SCHEMA_VERSION, "t": _fmt(state.t), "N": g.N, "R": _fmt(g.R),
            "model": model.value}
    for k, v in (extra or {}).items():
        if k in head or "=" in k or "\n" in str(v):
            raise ValueError(f"bad header entry {k!r}")
        head[k] = v
    lines = [f"# {MAGIC}"]
    lines += [f"# {k} = {v}" for k, v in head.items()]
    lines.append(_COLUMNS)
    body = np.column_stack([g.r, state.u, state.v])
    lines += [" ".join(_fmt(x) for x in row) for row in body]
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)
    return path


def read_snapshot(path):
    """Return ``(state, header)``; header values are kept as strings."""
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {MAGIC}":
            raise ValueError(f"{path}: not a snapshot record")
        head = {}
        for line in fh:
            line = line.strip()
            if not line.startswith("#"):
                break
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise ValueError(f"{path}: malformed header line {line!r}")
            head[key.strip()] = value.strip()
        if line != _COLUMNS:
            raise ValueError(f"{path}: expected column header {_COLUMNS!r}")
        data = np.loadtxt(fh, ndmin=2)
    if int(head.get("schema", -1)) != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema {head.get('schema')}")
    grid = make_grid(float(head["R"]), int(head["N"]))
    if data.shape != (grid.N, 3):
        raise ValueError(f"{path}: expected {grid.N} rows of r u v")
    if not np.array_equal(data[:, 0], grid.r):
        raise ValueError(f"{path}: radii do not match a cell-centred grid")
    state = FieldState(float(head["t"]), data[:, 1].copy(), data[:, 2].copy(), grid)
    return state, head


def snapshot_model(head: dict) -> ModelKind:
    return ModelKind.parse(head["model"])


# --------------------------------------------------------------------------
# checkpoints


def _config_header(config: SolverConfig) -> dict:
    bc = config.outer_bc
    thr = config.blowup_gradient_threshold
    return {
        "cfl": _fmt(config.cfl), "t_start": _fmt(config.t_start),
        "t_end": _fmt(config.t_end), "bc": bc.kind, "bc_value": _fmt(bc.value),
        "bc_T0": _fmt(bc.T0), "threshold": "auto" if thr is None else _fmt(thr),
        "snapshot_stride": config.snapshot_stride,
        "diagnostic_stride": config.diagnostic_stride,
        "lambda": _fmt(config.annular_lambda),
    }


def write_checkpoint(path, state: FieldState, config: SolverConfig) -> Path:
    if state.grid != config.grid:
        raise ValueError("state and config use different grids")
    return write_snapshot(path, state, config.model, _config_header(config))


def read_checkpoint(path):
    """Return ``(state, SolverConfig)`` from a checkpoint record."""
    state, h = read_snapshot(path)
    try:
        thr = None if h["threshold"] == "auto" else float(h["threshold"])
        config = SolverConfig(
            model=snapshot_model(h), grid=state.grid, cfl=float(h["cfl"]),
            t_start=float(h["t_start"]), t_end=float(h["t_end"]),
            outer_bc=OuterBC(h["bc"], float(h["bc_value"]), float(h["bc_T0"])),
            blowup_gradient_threshold=thr,
            snapshot_stride=int(h["snapshot_stride"]),
            diagnostic_stride=int(h["diagnostic_stride"]),
            annular_lambda=float(h["lambda"]))
    except KeyError as err:
        raise ValueError(f"{path}: not a checkpoint (missing {err.args[0]})") from None
    return state, config


# --------------------------------------------------------------------------
# static profiles


def write_profile(path, profile) -> Path:
    """Static profile as a snapshot at t = 0 with v = 0."""
    extra = {"kind": "static_profile", "slope": _fmt(profile.slope),
             "Q": _fmt(profile.Q), "energy": _fmt(profile.energy)}
    return write_snapshot(path, profile.state(0.0), ModelKind.ADKINS_NAPPI, extra)


def read_profile(path):
    from .static import StaticProfile
    state, h = read_snapshot(path)
    if h.get("kind") != "static_profile":
        raise ValueError(f"{path}: not a static profile record")
    g = state.grid
    u = state.u
    u_r = np.gradient(u, g.h)
    return StaticProfile(slope=float(h["slope"]), r_nodes=np.array(g.r), u=u, u_r=u_r,
                         Q=float(h["Q"]), energy=float(h["energy"]), r_max=g.R)


def snapshot_name(index: int) -> str:
    return f"snap_{index:06d}.txt"


def load_snapshot_dir(directory):
    """All ``snap_*.txt`` records in a directory, sorted by time."""
    paths = sorted(Path(directory).glob("snap_*.txt"))
    if not paths:
        raise FileNotFoundError(f"no snapshots in {directory}")
    loaded = [read_snapshot(p) for p in paths]
    loaded.sort(key=lambda sh: sh[0].t)
    times = [s.t for s, _ in loaded]
    if any(not b > a for a, b in zip(times, times[1:])):
        raise ValueError(f"{directory}: duplicate snapshot times")
    if not all(math.isfinite(t) for t in times):
        raise ValueError(f"{directory}: non-finite snapshot time")
    return [s for s, _ in loaded], [h for _, h in loaded]
