import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skyrmewave import config as C
from skyrmewave.model import ModelKind

SAMPLE = """
[model]
kind = wavemap

[grid]
R = 3.0
N = 1024

[time]
t_end = -0.2

[data]
family = turok_spergel
T0 = 0.0

[diagnostics]
report_times = -0.5, -0.25
"""


def test_defaults():
    cfg = C.load()
    assert cfg.model is ModelKind.ADKINS_NAPPI
    assert (cfg.R, cfg.N, cfg.cfl, cfg.t_start, cfg.t_end) == (2.5, 2048, 0.5, -1.0, 0.0)
    assert cfg.family == "gaussian" and cfg.threshold is None
    assert cfg.outer_bc().kind == "dirichlet_constant"


def test_parse_sample():
    cfg = C.parse(SAMPLE)
    assert cfg.model is ModelKind.WAVE_MAP and cfg.N == 1024 and cfg.R == 3.0
    assert cfg.report_times == (-0.5, -0.25)
    assert cfg.data_params == {"T0": 0.0}
    assert cfg.outer_bc().kind == "dirichlet_exact"
    sc = cfg.solver_config()
    assert sc.grid.N == 1024 and sc.t_end == -0.2


def test_emit_parse_identity():
    cfg = C.parse(SAMPLE)
    assert C.parse(C.emit(cfg)) == cfg
    assert C.emit(C.parse(C.emit(cfg))) == C.emit(cfg)


@given(R=st.floats(0.1, 100), N=st.integers(8, 10**6), cfl=st.floats(0.01, 1.0),
       t_end=st.floats(-0.99, 0.0), lam=st.floats(0.0, 1.0),
       thr=st.one_of(st.none(), st.floats(1.0, 1e6)),
       sigma=st.floats(0.01, 5.0))
@settings(max_examples=50)
def test_round_trip_property(R, N, cfl, t_end, lam, thr, sigma):
    raw = {"grid": {"R": repr(R), "N": str(N)}, "time": {"cfl": repr(cfl), "t_end": repr(t_end)},
           "diagnostics": {"lambda": repr(lam),
                           "blowup_threshold": "auto" if thr is None else repr(thr)},
           "data": {"family": "gaussian", "sigma": repr(sigma)}}
    cfg = C.RunConfig.from_raw(raw)
    again = C.parse(C.emit(cfg))
    assert again == cfg
    assert (again.R, again.N, again.cfl, again.t_end, again.lam, again.threshold) == \
        (R, N, cfl, t_end, lam, thr)


def test_overrides_shadow_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SAMPLE)
    cfg = C.load(path, ["grid.N=256", "time.cfl=0.25", "grid.N=512"])
    assert cfg.N == 512 and cfg.cfl == 0.25 and cfg.R == 3.0


@pytest.mark.parametrize("text", [
    "[grid]\nbogus = 1\n",
    "[nonsense]\nx = 1\n",
    "[grid]\nN = many\n",
    "[grid]\nR = nan\n",
    "[model]\nkind = sine_gordon\n",
    "[data]\nfamily = gaussian\nT0 = 1\n",
    "[data]\nfamily = lumps\n",
    "not an ini file",
])
def test_malformed(text):
    with pytest.raises(C.ConfigError):
        C.parse(text)


@pytest.mark.parametrize("item", ["grid.N", "gridN=3", ".N=3", "grid.=3"])
def test_malformed_override(item):
    with pytest.raises(C.ConfigError):
        C.load(None, [item])


def test_missing_file(tmp_path):
    with pytest.raises(C.ConfigError):
        C.load(tmp_path / "absent.ini")


@pytest.mark.parametrize("overrides", [
    ["diagnostics.report_times=-1.5"],
    ["diagnostics.report_times=0.5"],
    ["converge.levels=500, 1000"],
    ["converge.levels=1024, 512"],
    ["static.tol=0"],
    ["static.tol=-1e-3"],
    ["time.cfl=1.5"],
    ["time.t_end=-2"],
    ["boundary.kind=periodic"],
    ["data.family=turok_spergel", "data.T0=-1.5"],
    ["data.family=static"],
    ["data.family=static", "data.profile=/no/such/file"],
])
def test_validation(overrides, tmp_path):
    cfg = C.load(None, overrides + [f"output.dir={tmp_path / 'o'}"])
    with pytest.raises(C.ConfigError):
        C.validate(cfg)


def test_valid_levels():
    C.validate_levels((512, 1024, 4096))


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = C.load(None, [f"output.dir={blocker / 'sub'}"])
    with pytest.raises(C.ConfigError):
        C.validate(cfg)


def test_explicit_boundary():
    cfg = C.load(None, ["boundary.kind=dirichlet_constant", "boundary.value=1.5"])
    bc = cfg.outer_bc()
    assert bc.kind == "dirichlet_constant" and bc.value == 1.5
    assert C.load(None, ["boundary.kind=outgoing"]).outer_bc().kind == "outgoing"


def test_family_alias():
    assert C.load(None, ["data.family=ts"]).family == "turok_spergel"
