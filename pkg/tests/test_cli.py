import csv
import math

import numpy as np
import pytest

from skyrmewave import cli
from skyrmewave import diagnostics as D
from skyrmewave import snapshot as snap
from skyrmewave.fields import FieldState, make_grid
from skyrmewave.model import ModelKind

from conftest import ts_snapshots


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def an_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("an")
    code = cli.main(["evolve", "--model", "adkins_nappi", "--data", "gaussian", "--N", "2048",
                     "--t-end", "-0.05", "--set", "data.sigma=0.5", "--set", "data.p=2",
                     "--out", str(out)])
    return code, out


@pytest.fixture(scope="module")
def static_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("static")
    return cli.main(["static", "--out", str(out)]), out


class TestEvolve:
    def test_turok_spergel_blows_up(self, tmp_path, capsys):
        code = cli.main(["evolve", "--model", "wavemap", "--data", "turok_spergel",
                         "--set", "data.T0=0", "--N", "2048",
                         "--set", "diagnostics.blowup_threshold=1000", "--out", str(tmp_path)])
        assert code == cli.EXIT_BLOWUP
        event = dict(line.split(" = ") for line in
                     (tmp_path / "event.txt").read_text().splitlines())
        assert float(event["sup_gradient"]) >= 1000.0
        assert -5e-3 < float(event["t_detect"]) < 0
        assert (tmp_path / "series.csv").exists()
        assert "blowup detected" in capsys.readouterr().out

    def test_gaussian_clean_finish(self, an_run):
        code, out = an_run
        assert code == cli.EXIT_OK
        rows = read_csv(out / "series.csv")
        assert list(rows[0]) == list(D.CSV_COLUMNS)
        E = np.array([float(r["E_cone"]) for r in rows])
        E0 = float(rows[0]["E_cone"])
        assert np.max(np.diff(E)) <= 1e-3 * E0
        assert float(rows[-1]["t"]) == -0.05
        assert not (out / "event.txt").exists()
        assert (out / "checkpoint.txt").exists() and (out / "run.ini").exists()
        assert len(list((out / "snapshots").glob("snap_*.txt"))) > 10

    @pytest.mark.parametrize("argv", [
        ["--set", "grid.bogus=3"],
        ["--set", "time.cfl=abc"],
        ["--set", "nodot=3"],
        ["--data", "nonsense"],
    ])
    def test_malformed_config_leaves_nothing(self, tmp_path, argv, capsys):
        out = tmp_path / "out"
        assert cli.main(["evolve", "--out", str(out)] + argv) == cli.EXIT_FAIL
        assert not out.exists()
        assert "error:" in capsys.readouterr().err

    def test_config_file_and_flags(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[grid]\nN = 64\n[time]\nt_end = -0.9\n[output]\ndir = ignored\n")
        out = tmp_path / "o"
        assert cli.main(["evolve", "--config", str(ini), "--N", "128", "--out", str(out)]) == 0
        state, _ = snap.read_snapshot(out / "checkpoint.txt")
        assert state.grid.N == 128 and state.t == -0.9
        assert not (tmp_path / "ignored").exists()

    def test_deterministic_outputs(self, tmp_path):
        outs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            assert cli.main(["evolve", "--N", "128", "--t-end", "-0.8", "--out", str(out)]) == 0
            outs.append(out)
        assert (outs[0] / "series.csv").read_bytes() == (outs[1] / "series.csv").read_bytes()
        for a in sorted((outs[0] / "snapshots").iterdir()):
            assert a.read_bytes() == (outs[1] / "snapshots" / a.name).read_bytes()

    def test_resume(self, tmp_path):
        first = tmp_path / "a"
        assert cli.main(["evolve", "--N", "128", "--t-end", "-0.9", "--out", str(first)]) == 0
        second = tmp_path / "b"
        assert cli.main(["evolve", "--resume", str(first / "checkpoint.txt"),
                         "--t-end", "-0.8", "--out", str(second)]) == 0
        state, _ = snap.read_snapshot(second / "checkpoint.txt")
        assert state.t == -0.8

    def test_static_profile_as_data(self, static_run, tmp_path):
        _, sdir = static_run
        out = tmp_path / "o"
        code = cli.main(["evolve", "--data", "static", "--set",
                         f"data.profile={sdir / 'profile.txt'}", "--set", "data.lam=1",
                         "--R", "50", "--N", "1024", "--t-end", "-0.9", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "series.csv")
        assert abs(float(rows[-1]["Q"]) - 1.0) < 1e-2


class TestConverge:
    def test_wave_map_exact_order(self, tmp_path, capsys):
        code = cli.main(["converge", "--model", "wavemap", "--data", "turok_spergel",
                         "--levels", "512,1024,2048", "--t-end", "-0.2", "--out", str(tmp_path)])
        assert code == 0
        rows = read_csv(tmp_path / "convergence.csv")
        orders = [float(r["order"]) for r in rows[1:]]
        assert all(abs(o - 2.0) <= 0.25 for o in orders)
        assert "order" in capsys.readouterr().out

    def test_adkins_nappi_self_convergence(self, tmp_path):
        code = cli.main(["converge", "--model", "adkins_nappi", "--data", "gaussian",
                         "--levels", "512,1024,2048", "--t-end", "-0.2", "--out", str(tmp_path)])
        assert code == 0
        rows = read_csv(tmp_path / "convergence.csv")
        assert abs(float(rows[1]["order"]) - 2.0) <= 0.25
        assert math.isnan(float(rows[-1]["error"]))

    def test_levels_must_be_powers_of_two(self, tmp_path):
        out = tmp_path / "c"
        assert cli.main(["converge", "--levels", "500,1000", "--out", str(out)]) == 1
        assert not out.exists()

    def test_restrict(self):
        assert np.array_equal(cli.restrict(np.arange(8.0), 2), [0.5, 2.5, 4.5, 6.5])


class TestStatic:
    def test_defaults(self, static_run, capsys):
        code, out = static_run
        assert code == 0
        prof = snap.read_profile(out / "profile.txt")
        assert 0.99 <= prof.Q <= 1.01

    def test_summary_and_continuation(self, static_run, tmp_path, capsys):
        _, out = static_run
        a = snap.read_profile(out / "profile.txt").slope
        assert cli.main(["static", "--r-max", "100", "--N", "1024", "--out", str(tmp_path)]) == 0
        text = capsys.readouterr().out
        summary = dict(line.split(" = ") for line in text.splitlines())
        assert set(summary) == {"a", "Q", "energy"}
        assert abs(float(summary["a"]) - a) < 10 * 1e-10 * a

    @pytest.mark.parametrize("tol", ["0", "-1e-6"])
    def test_bad_tolerance(self, tmp_path, tol):
        out = tmp_path / "s"
        assert cli.main(["static", f"--tol={tol}", "--out", str(out)]) == 1
        assert not out.exists()


class TestReport:
    def test_zero_field(self, tmp_path):
        g = make_grid(2.5, 64)
        sdir = tmp_path / "snaps"
        sdir.mkdir()
        for i, t in enumerate(np.linspace(-1.0, -0.1, 10)):
            snap.write_snapshot(sdir / snap.snapshot_name(i),
                                FieldState(float(t), np.zeros(64), np.zeros(64), g), "adkins_nappi")
        assert cli.main(["report", str(sdir), "--report-times=-0.8,-0.4", "--out",
                         str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "cone_report.csv")
        assert list(rows[0]) == list(cli.REPORT_COLUMNS)
        for row in rows:
            assert all(float(row[k]) == 0.0 for k in cli.REPORT_COLUMNS[2:])

    def test_turok_spergel_decomposition(self, tmp_path):
        g = make_grid(2.5, 1024)
        sdir = tmp_path / "snaps"
        sdir.mkdir()
        snaps = ts_snapshots(g, np.linspace(-0.6, -0.1, 11))
        for i, s in enumerate(snaps):
            snap.write_snapshot(sdir / snap.snapshot_name(i), s, "wavemap")
        assert cli.main(["report", str(sdir), "--report-times=-0.5", "--out", str(tmp_path)]) == 0
        row = read_csv(tmp_path / "cone_report.csv")[0]
        decomposed = D.eq_non_decomposed(snaps[2], ModelKind.WAVE_MAP)
        assert float(row["eq_non"]) == pytest.approx(decomposed, rel=1e-10)

    def test_h2_column_from_run(self, an_run, tmp_path):
        _, out = an_run
        assert cli.main(["report", str(out / "snapshots"), "--report-times=-0.5,-0.25,-0.125",
                         "--lambda", "0.5", "--out", str(tmp_path)]) == 0
        h2 = [float(r["h2"]) for r in read_csv(tmp_path / "cone_report.csv")]
        assert len(h2) == 3 and all(math.isfinite(x) and x >= 0 for x in h2)

    def test_coverage_error(self, an_run, tmp_path):
        _, out = an_run
        assert cli.main(["report", str(out / "snapshots"), "--report-times=-0.01",
                         "--out", str(tmp_path)]) == 1

    def test_missing_times(self, an_run, tmp_path):
        _, out = an_run
        assert cli.main(["report", str(out / "snapshots"), "--out", str(tmp_path)]) == 1


def test_console_entry_point_help(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--help"])
    assert info.value.code == 0
    assert "evolve" in capsys.readouterr().out


def test_usage_error_is_not_the_blowup_status(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["evolve", "--N", "many"])
    assert info.value.code == cli.EXIT_FAIL


def test_unknown_model_rejected(tmp_path):
    assert cli.main(["evolve", "--model", "sigma", "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_model_alias_accepted(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["evolve", "--model", "wave_map", "--N", "64", "--t-end", "-0.9",
                     "--out", str(out)]) == 0
    assert "kind = wavemap" in (out / "run.ini").read_text()
