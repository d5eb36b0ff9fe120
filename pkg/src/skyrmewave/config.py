"""Run configuration: one-level ``[section] key = value`` files.

Values pass through three layers, each shadowing the previous one: the
defaults below, the config file, then command-line overrides.  Everything
is merged as text and converted once, so a config written by ``emit`` and
parsed again is the same config.
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .fields import make_grid
from .model import ModelKind
from .solver import OuterBC, SolverConfig


class ConfigError(ValueError):
    pass


def _float(text):
    try:
        x = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"not a finite number: {text!r}")
    return x


def _int(text):
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _float_list(text):
    text = str(text).strip()
    return tuple(_float(x) for x in text.split(",")) if text else ()


def _int_list(text):
    text = str(text).strip()
    return tuple(_int(x) for x in text.split(",")) if text else ()


def _threshold(text):
    return None if str(text).strip().lower() == "auto" else _float(text)


def _model(text):
    try:
        return ModelKind.parse(text)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _str(text):
    return str(text).strip()


def _show(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, ModelKind):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_show(v) for v in value)
    return str(value)


# (section, key, attribute, parser, default)
_FIELDS = (
    ("model", "kind", "model", _model, "adkins_nappi"),
    ("grid", "R", "R", _float, "2.5"),
    ("grid", "N", "N", _int, "2048"),
    ("time", "cfl", "cfl", _float, "0.5"),
    ("time", "t_start", "t_start", _float, "-1.0"),
    ("time", "t_end", "t_end", _float, "0.0"),
    ("boundary", "kind", "bc_kind", _str, "auto"),
    ("boundary", "value", "bc_value", _float, repr(math.pi)),
    ("boundary", "T0", "bc_T0", _float, "0.0"),
    ("data", "family", "family", _str, "gaussian"),
    ("diagnostics", "blowup_threshold", "threshold", _threshold, "auto"),
    ("diagnostics", "snapshot_stride", "snapshot_stride", _int, "10"),
    ("diagnostics", "diagnostic_stride", "diagnostic_stride", _int, "1"),
    ("diagnostics", "lambda", "lam", _float, "0.5"),
    ("diagnostics", "report_times", "report_times", _float_list, ""),
    ("output", "dir", "out_dir", _str, "out"),
    ("converge", "levels", "levels", _int_list, "512, 1024, 2048"),
    ("static", "r_max", "static_r_max", _float, "50.0"),
    ("static", "N", "static_N", _int, "8192"),
    ("static", "tol", "static_tol", _float, "1e-10"),
)
_KNOWN = {(s, k) for s, k, *_ in _FIELDS}

# parameters accepted in [data] besides ``family``
DATA_PARAMS = {
    "turok_spergel": {"T0": _float},
    "gaussian": {"sigma": _float, "p": _float},
    "static": {"profile": _str, "lam": _float},
}
_FAMILY_ALIASES = {"ts": "turok_spergel", "gaussian_lump": "gaussian",
                   "rescaled_static": "static"}


@dataclass
class RunConfig:
    model: ModelKind
    R: float
    N: int
    cfl: float
    t_start: float
    t_end: float
    bc_kind: str
    bc_value: float
    bc_T0: float
    family: str
    threshold: float | None
    snapshot_stride: int
    diagnostic_stride: int
    lam: float
    report_times: tuple
    out_dir: str
    levels: tuple
    static_r_max: float
    static_N: int
    static_tol: float
    data_params: dict = field(default_factory=dict)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_raw(cls, raw: dict) -> "RunConfig":
        """Build from ``{section: {key: text}}``, rejecting unknown keys."""
        values = {}
        for section, key, attr, parse, default in _FIELDS:
            text = raw.get(section, {}).get(key, default)
            try:
                values[attr] = parse(text)
            except ConfigError as err:
                raise ConfigError(f"[{section}] {key}: {err}") from None
        family = _FAMILY_ALIASES.get(values["family"].lower(), values["family"].lower())
        if family not in DATA_PARAMS:
            raise ConfigError(f"[data] family: unknown family {values['family']!r}")
        values["family"] = family
        allowed = DATA_PARAMS[family]
        params = {}
        for section, entries in raw.items():
            for key, text in entries.items():
                if (section, key) in _KNOWN or (section == "data" and key == "family"):
                    continue
                if section == "data" and key in allowed:
                    try:
                        params[key] = allowed[key](text)
                    except ConfigError as err:
                        raise ConfigError(f"[data] {key}: {err}") from None
                    continue
                raise ConfigError(f"unknown configuration key {section}.{key}")
        values["data_params"] = params
        return cls(**values)

    def to_raw(self) -> dict:
        raw: dict = {}
        for section, key, attr, _, _ in _FIELDS:
            raw.setdefault(section, {})[key] = _show(getattr(self, attr))
        for key in sorted(self.data_params):
            raw["data"][key] = _show(self.data_params[key])
        return raw

    # -- derived objects ---------------------------------------------------

    def outer_bc(self, profile=None) -> OuterBC:
        kind = self.bc_kind
        if kind == "auto":
            if self.family == "turok_spergel":
                return OuterBC.exact(self.data_params.get("T0", 0.0))
            if self.family == "static" and profile is not None:
                u = profile.evaluate(self.R / self.data_params.get("lam", 1.0))
                return OuterBC.constant(float(u))
            return OuterBC.constant(math.pi)
        return OuterBC(kind, self.bc_value, self.bc_T0)

    def solver_config(self, profile=None, N: int | None = None) -> SolverConfig:
        return SolverConfig(
            model=self.model, grid=make_grid(self.R, self.N if N is None else N),
            cfl=self.cfl, t_start=self.t_start, t_end=self.t_end,
            outer_bc=self.outer_bc(profile), blowup_gradient_threshold=self.threshold,
            snapshot_stride=self.snapshot_stride,
            diagnostic_stride=self.diagnostic_stride, annular_lambda=self.lam)

    def data_args(self, profile=None) -> tuple:
        """(family, params) for solver.initial_data."""
        params = dict(self.data_params)
        if self.family == "static":
            params["profile"] = profile
        return self.family, params


# --------------------------------------------------------------------------
# text form


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"))
    cp.optionxform = str            # keys such as N, R and T0 are case-sensitive
    return cp


def read_raw(text: str, source: str = "<config>") -> dict:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"{source}: {err}") from None
    return {s: dict(cp[s]) for s in cp.sections()}


def parse(text: str, source: str = "<config>") -> RunConfig:
    return RunConfig.from_raw(read_raw(text, source))


def emit(config: RunConfig) -> str:
    lines = []
    for section, entries in config.to_raw().items():
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in entries.items()]
    return "\n".join(lines) + "\n"


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply one ``section.key=value`` assignment to a raw mapping in place."""
    lhs, sep, value = assignment.partition("=")
    section, dot, key = lhs.strip().partition(".")
    if not sep or not dot or not section or not key.strip():
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}")
    raw.setdefault(section, {})[key.strip()] = value.strip()
    return raw


def load(path=None, overrides=()) -> RunConfig:
    """Defaults, then the file at ``path``, then each override in order."""
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from None
        raw = read_raw(text, str(path))
    for item in overrides:
        apply_override(raw, item)
    return RunConfig.from_raw(raw)


# --------------------------------------------------------------------------
# validation


def _writable(path: Path) -> bool:
    p = path.resolve()
    while not p.exists():
        p = p.parent
    return p.is_dir() and os.access(p, os.W_OK | os.X_OK)


def validate(config: RunConfig) -> None:
    """Everything that can be checked without running; raises ConfigError."""
    try:
        config.solver_config()
    except ValueError as err:
        raise ConfigError(str(err)) from None
    if config.bc_kind not in ("auto",) + OuterBC.KINDS:
        raise ConfigError(f"[boundary] kind: unknown boundary {config.bc_kind!r}")
    p = config.data_params
    if config.family == "turok_spergel" and not p.get("T0", 0.0) > config.t_start:
        raise ConfigError("Turok-Spergel data needs T0 > t_start")
    if config.family == "gaussian" and (p.get("sigma", 1.0) <= 0 or p.get("p", 1.0) <= 0):
        raise ConfigError("gaussian data needs sigma > 0 and p > 0")
    if config.family == "static":
        if "profile" not in p:
            raise ConfigError("static data needs [data] profile = PATH")
        if not Path(p["profile"]).is_file():
            raise ConfigError(f"profile file {p['profile']} not found")
        if p.get("lam", 1.0) <= 0:
            raise ConfigError("static data needs lam > 0")
    for T in config.report_times:
        if not config.t_start < T < config.t_end or T >= 0:
            raise ConfigError(f"report time {T} outside (t_start, min(t_end, 0))")
    validate_levels(config.levels)
    if not config.static_tol > 0:
        raise ConfigError("[static] tol must be positive")
    if not config.static_r_max > 0:
        raise ConfigError("[static] r_max must be positive")
    if config.static_N < 8:
        raise ConfigError("[static] N must be at least 8")
    if not _writable(Path(config.out_dir)):
        raise ConfigError(f"output directory {config.out_dir} is not writable")


def validate_levels(levels) -> None:
    if not levels:
        raise ConfigError("[converge] levels must not be empty")
    first = levels[0]
    if first < 8:
        raise ConfigError("[converge] levels must be at least 8")
    for a, b in zip(levels, levels[1:]):
        if not b > a:
            raise ConfigError("[converge] levels must increase")
    # every level a power of two, which makes each a power-of-two multiple of the first
    for n in levels:
        if n & (n - 1):
            raise ConfigError(f"[converge] level {n} is not a power of two")
