"""Command-line front end: ``skyrmewave {evolve,converge,static,report}``.

Exit status: 0 on success, 2 when ``evolve`` detects blowup, 1 on any
configuration, IO or numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import diagnostics as diag
from . import snapshot as snap
from .model import ModelKind, turok_spergel
from .solver import InstabilityError, evolve, initial_data, resume
from .static import NoBracket, solve_static

log = logging.getLogger("skyrmewave")

EXIT_OK, EXIT_FAIL, EXIT_BLOWUP = 0, 1, 2

# dedicated flags and the config keys they set
_FLAG_KEYS = {
    "out": "output.dir", "model": "model.kind", "N": "grid.N", "R": "grid.R",
    "cfl": "time.cfl", "t_end": "time.t_end", "data": "data.family",
    "lam": "diagnostics.lambda", "report_times": "diagnostics.report_times",
}


class CliError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_FAIL; status 2 is reserved for blowup."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, flags=tuple(_FLAG_KEYS)):
    p.add_argument("--config", type=Path, help="INI-style run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override one config entry (repeatable)")
    p.add_argument("--out", help="output directory")
    if "model" in flags:
        p.add_argument("--model", help="wavemap (wave_map) or adkins_nappi (an)")
    if "N" in flags:
        p.add_argument("--N", type=int, help="number of grid cells")
    if "R" in flags:
        p.add_argument("--R", type=float, help="outer radius")
    if "cfl" in flags:
        p.add_argument("--cfl", type=float)
    if "t_end" in flags:
        p.add_argument("--t-end", dest="t_end", type=float)
    if "data" in flags:
        p.add_argument("--data", help="initial-data family")
    if "lam" in flags:
        p.add_argument("--lambda", dest="lam", type=float, help="annulus fraction in [0, 1]")
    if "report_times" in flags:
        p.add_argument("--report-times", dest="report_times",
                       help="comma-separated report times T < 0, e.g. --report-times=-0.5,-0.25")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skyrmewave", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("evolve", help="run one evolution")
    _common(e)
    e.add_argument("--resume", type=Path, metavar="CHECKPOINT",
                   help="continue from a checkpoint instead of building initial data")

    c = sub.add_parser("converge", help="convergence study over grid levels")
    _common(c)
    c.add_argument("--levels", help="comma-separated cell counts, e.g. 512,1024,2048")

    s = sub.add_parser("static", help="solve for the static soliton")
    _common(s, flags=("N",))
    s.add_argument("--r-max", dest="r_max", type=float)
    s.add_argument("--tol", type=float)

    r = sub.add_parser("report", help="cone functionals from a snapshot directory")
    _common(r, flags=("model", "lam", "report_times"))
    r.add_argument("snapshots", type=Path, help="directory holding snap_*.txt records")
    return p


def _format_flag(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _load_config(args) -> cfgmod.RunConfig:
    overrides = list(args.overrides)
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            if args.command == "static" and attr == "N":
                key = "static.N"
            overrides.append(f"{key}={_format_flag(value)}")
    if args.command == "converge" and args.levels:
        overrides.append(f"converge.levels={args.levels}")
    if args.command == "static":
        if args.r_max is not None:
            overrides.append(f"static.r_max={args.r_max!r}")
        if args.tol is not None:
            overrides.append(f"static.tol={args.tol!r}")
    return cfgmod.load(args.config, overrides)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(x, ".17g") if isinstance(x, float) else x for x in row])


def _write_event(path: Path, event):
    path.write_text(f"t_detect = {event.t_detect!r}\n"
                    f"sup_gradient = {event.sup_gradient!r}\n"
                    f"r_star = {event.r_star!r}\n")


# --------------------------------------------------------------------------
# evolve


def _setup_run(cfg: cfgmod.RunConfig, N: int | None = None):
    profile = None
    if cfg.family == "static":
        profile = snap.read_profile(cfg.data_params["profile"])
    sc = cfg.solver_config(profile, N=N)
    family, params = cfg.data_args(profile)
    data = initial_data(family, params, sc.grid, sc.t_start)
    return sc, data


def cmd_evolve(args) -> int:
    cfg = _load_config(args)
    if args.resume is not None:
        state, sc = snap.read_checkpoint(args.resume)
        if args.t_end is not None:
            sc.t_end = float(args.t_end)
        cfgmod.validate(cfg)
    else:
        cfgmod.validate(cfg)
        sc, state = _setup_run(cfg)
    out = Path(cfg.out_dir)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    for stale in snap_dir.glob("snap_*.txt"):
        stale.unlink()
    counter = iter(range(10**9))

    def store(s):
        snap.write_snapshot(snap_dir / snap.snapshot_name(next(counter)), s, sc.model)

    try:
        if args.resume is not None:
            result = resume(sc, state, on_snapshot=store)
        else:
            result = evolve(sc, state, on_snapshot=store)
    except InstabilityError as err:
        if err.result is not None:
            err.result.series.write_csv(out / "series.csv")
        if err.last_state is not None:
            snap.write_checkpoint(out / "checkpoint.txt", err.last_state, sc)
        raise CliError(f"evolution became unstable: {err}") from None
    result.series.write_csv(out / "series.csv")
    snap.write_checkpoint(out / "checkpoint.txt", result.final, sc)
    if args.resume is None:
        (out / "run.ini").write_text(cfgmod.emit(cfg))
    if result.event is not None:
        _write_event(out / "event.txt", result.event)
        print(f"blowup detected at t = {result.event.t_detect:.6g} "
              f"(sup|u_r| = {result.event.sup_gradient:.4g} at r = {result.event.r_star:.4g})")
        return EXIT_BLOWUP
    print(f"reached t = {result.final.t:.6g}; {len(result.series)} diagnostic rows, "
          f"{len(result.snapshots)} snapshots in {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# converge


def restrict(u_fine: np.ndarray, factor: int) -> np.ndarray:
    """Average blocks of ``factor`` fine cells onto the coarse cell centres."""
    return u_fine.reshape(-1, factor).mean(axis=1)


def convergence_table(cfg: cfgmod.RunConfig):
    """Rows (N, h, error, order) for the configured levels.

    With Turok-Spergel data under the wave map the error is measured against
    the exact solution; otherwise against the next finer level, restricted to
    the coarser grid, so the last level carries no error.
    """
    cfgmod.validate_levels(cfg.levels)
    finals = []
    for N in cfg.levels:
        sc, data = _setup_run(cfg, N)
        res = evolve(sc, data)
        if res.event is not None:
            raise CliError(f"blowup at t={res.event.t_detect:.6g} on level N={N}")
        finals.append(res.final)
        log.info("level N=%d done at t=%.6g", N, res.final.t)
    exact = cfg.model is ModelKind.WAVE_MAP and cfg.family == "turok_spergel"
    errors = []
    for k, fin in enumerate(finals):
        if exact:
            u_ex, _, _ = turok_spergel(fin.t, fin.grid.r, cfg.data_params.get("T0", 0.0))
            errors.append(float(np.max(np.abs(fin.u - u_ex))))
        elif k + 1 < len(finals):
            nxt = finals[k + 1]
            factor = nxt.grid.N // fin.grid.N
            errors.append(float(np.max(np.abs(fin.u - restrict(nxt.u, factor)))))
        else:
            errors.append(math.nan)
    rows = []
    for k, (N, err) in enumerate(zip(cfg.levels, errors)):
        order = math.nan
        if k > 0 and errors[k - 1] > 0 and err > 0:
            order = math.log(errors[k - 1] / err, cfg.levels[k] / cfg.levels[k - 1])
        rows.append((N, cfg.R / N, err, order))
    return rows


def cmd_converge(args) -> int:
    cfg = _load_config(args)
    cfgmod.validate(cfg)
    rows = convergence_table(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "convergence.csv", ("N", "h", "error", "order"), rows)
    print(f"{'N':>8} {'h':>12} {'error':>12} {'order':>7}")
    for N, h, err, order in rows:
        print(f"{N:8d} {h:12.5e} {err:12.5e} {order:7.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# static


def cmd_static(args) -> int:
    cfg = _load_config(args)
    cfgmod.validate(cfg)
    try:
        profile = solve_static(cfg.static_r_max, cfg.static_N, cfg.static_tol)
    except NoBracket as err:
        raise CliError(str(err)) from None
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap.write_profile(out / "profile.txt", profile)
    print(f"a = {profile.slope:.15g}")
    print(f"Q = {profile.Q:.15g}")
    print(f"energy = {profile.energy:.15g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


REPORT_COLUMNS = ("T", "t_last", "ie3", "ie4", "ie5", "eq_non", "h2", "annular", "els_ratio")


def report_rows(snapshots, times, lam, kind):
    rows = []
    stamps = np.array([s.t for s in snapshots])
    for T in times:
        rep = diag.cone_functionals(snapshots, T, lam, kind)
        nearest = snapshots[int(np.argmin(np.abs(stamps - T)))]
        _, _, els = diag.pointwise_estimate_check(nearest, kind, r_max=abs(nearest.t))
        rows.append((rep.T, rep.t_last, rep.ie3, rep.ie4, rep.ie5, rep.eq_non,
                     rep.h2, rep.annular, els))
    return rows


def cmd_report(args) -> int:
    cfg = _load_config(args)
    if not cfg.report_times:
        raise cfgmod.ConfigError("no report times given (--report-times)")
    if not 0.0 <= cfg.lam <= 1.0:
        raise cfgmod.ConfigError("lambda must lie in [0, 1]")
    snapshots, heads = snap.load_snapshot_dir(args.snapshots)
    kind = cfg.model if args.model else snap.snapshot_model(heads[0])
    rows = report_rows(snapshots, cfg.report_times, cfg.lam, kind)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "cone_report.csv", REPORT_COLUMNS, rows)
    for row in rows:
        print("  ".join(f"{name}={value:.6g}" for name, value in zip(REPORT_COLUMNS, row)))
    return EXIT_OK


COMMANDS = {"evolve": cmd_evolve, "converge": cmd_converge,
            "static": cmd_static, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (cfgmod.ConfigError, CliError, diag.InsufficientCoverage,
            FileNotFoundError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
