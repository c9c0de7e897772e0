"""Command-line interface: outputs, exit codes and determinism."""

import json
import subprocess
import sys

import pytest

from pdtradeoff import __version__
from pdtradeoff.cli import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main

MODEL = {"x_values": [-1, 0, 1], "prior": [0.3, 0.4, 0.3],
         "channel": [[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.2, 0.7]]}
GAUSS = {"x_values": [-1, 0, 1], "prior": [0.45, 0.1, 0.45], "sigma": 1.0,
         "grid": {"lo": -8, "hi": 8, "n_bins": 60}}
RECORDS = "name,distortion,perception\nA,3,4\nB,2,3\nC,1,5\nD,4,1\n"


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, obj in (("model", MODEL), ("gauss", GAUSS)):
        paths[name] = tmp_path / f"{name}.json"
        paths[name].write_text(json.dumps(obj))
    paths["records"] = tmp_path / "records.csv"
    paths["records"].write_text(RECORDS)
    paths["empty"] = tmp_path / "empty.json"
    paths["empty"].write_text("")
    paths["dir"] = tmp_path
    return paths


def run(*args):
    return main(["-q", *map(str, args)])


class TestCurve:
    def test_default_schedule(self, files, capsys):
        out = files["dir"] / "c.csv"
        assert run("curve", files["model"], "--out", out) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda,distortion,perception,gap"
        assert len(lines) == 25
        summary = capsys.readouterr().out
        assert "D_min=" in summary and "points=24" in summary

    def test_sixteen_points(self, files):
        out = files["dir"] / "c.csv"
        lams = ",".join(str(10 ** (k / 5 - 1.5)) for k in range(16))
        assert run("curve", files["model"], "--lambdas", lams, "--out", out) == EXIT_OK
        assert len(out.read_text().splitlines()) == 17

    def test_trinary_sixteen_rows_monotone(self, files):
        out = files["dir"] / "t.csv"
        lams = ",".join(repr(10 ** (k / 3 - 2.5)) for k in range(16))
        code = run("curve", files["gauss"], "--divergence", "kl", "--lambdas", lams,
                   "--out", out)
        assert code == EXIT_OK
        rows = [list(map(float, r.split(","))) for r in out.read_text().splitlines()[1:]]
        assert len(rows) == 16
        rows.sort(key=lambda r: r[1])
        perc = [r[2] for r in rows]
        assert all(b <= a + 1e-12 for a, b in zip(perc, perc[1:]))

    def test_single_zero_multiplier(self, files, capsys):
        assert run("curve", files["model"], "--lambdas", "0") == EXIT_OK
        rows = capsys.readouterr().out.splitlines()
        assert len(rows) == 2
        lam, dist = rows[1].split(",")[:2]
        assert lam == "0.0" and float(dist) == pytest.approx(0.52, abs=1e-12)

    def test_byte_identical(self, files):
        a, b = files["dir"] / "a.csv", files["dir"] / "b.csv"
        run("curve", files["gauss"], "--divergence", "js", "--out", a)
        run("curve", files["gauss"], "--divergence", "js", "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_flagged_points(self, files):
        out = files["dir"] / "c.csv"
        code = run("curve", files["gauss"], "--max-iters", "1", "--lambdas", "1,10,100",
                   "--out", out)
        assert code == EXIT_NUMERICAL
        assert out.read_text().splitlines()[0].endswith(",flagged")

    @pytest.mark.parametrize("lams", ["", "1,0.5", "-1", "a,b"])
    def test_bad_lambdas(self, files, lams):
        assert run("curve", files["model"], "--lambdas", lams) == EXIT_USAGE


class TestInputs:
    def test_empty_file_names_it(self, files, capsys):
        assert run("bounds", files["empty"]) == EXIT_USAGE
        assert "empty.json" in capsys.readouterr().err

    def test_missing_file(self, files):
        assert run("bounds", files["dir"] / "nope.json") == EXIT_IO

    def test_missing_output_directory(self, files):
        assert run("gaussian", "--sigma", "1", "--out", files["dir"] / "no" / "x.csv") == EXIT_IO

    @pytest.mark.parametrize("patch", [{"extra": 1}, {"prior": [0.5, 0.5, 0.5]},
                                       {"channel": [1, 2]}])
    def test_invalid_models(self, files, patch):
        bad = files["dir"] / "bad.json"
        bad.write_text(json.dumps({**MODEL, **patch}))
        assert run("bounds", bad) == EXIT_USAGE

    def test_bad_json(self, files):
        bad = files["dir"] / "bad.json"
        bad.write_text("{not json")
        assert run("bounds", bad) == EXIT_USAGE

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == EXIT_USAGE

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestOtherCommands:
    def test_gaussian(self, capsys):
        assert run("gaussian", "--sigma", "1", "--d-grid", "0.5:1:11") == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "lambda,distortion,perception,gap"
        assert lines[1].split(",")[1] == "0.5"
        assert lines[-1] == "0.0,1.0,0.0,0.0"

    @pytest.mark.parametrize("grid", ["0.4:1:5", "1:0.5:3", "x"])
    def test_gaussian_bad_grid(self, grid):
        assert run("gaussian", "--sigma", "1", "--d-grid", grid) == EXIT_USAGE

    def test_bounds_noiseless(self, files, capsys):
        m = files["dir"] / "n.json"
        m.write_text(json.dumps({"x_values": [0, 1], "prior": [0.5, 0.5],
                                 "channel": [[1, 0], [0, 1]]}))
        assert run("bounds", m) == EXIT_OK
        out = capsys.readouterr().out
        assert "D_min = 0.0" in out and "D_max = 0.0" in out

    def test_estimators(self, files, capsys):
        assert run("estimators", files["model"], "--which", "ps", "--report") == EXIT_OK
        cap = capsys.readouterr()
        assert cap.out.splitlines()[0] == "y,-1.0,0.0,1.0"
        assert "tv = " in cap.err

    def test_plane(self, files, capsys):
        svg, csv = files["dir"] / "p.svg", files["dir"] / "p.csv"
        assert run("plane", files["records"], "--out-svg", svg, "--out-csv", csv) == EXIT_OK
        assert capsys.readouterr().out.strip() == "admissible = B,C,D"
        assert svg.read_text().count('class="admissible"') == 3
        assert csv.read_text().splitlines()[1] == "A,3.0,4.0,0"

    def test_plane_empty(self, files):
        empty = files["dir"] / "e.csv"
        empty.write_text("")
        assert run("plane", empty) == EXIT_USAGE

    def test_probe(self, files, capsys):
        assert run("probe", files["gauss"]) == EXIT_OK
        assert "result = " in capsys.readouterr().out

    def test_probe_invertible(self, files):
        m = files["dir"] / "n.json"
        m.write_text(json.dumps({"x_values": [0, 1], "prior": [0.5, 0.5],
                                 "channel": [[1, 0], [0, 1]]}))
        assert run("probe", m) == EXIT_USAGE

    def test_feature_distortion(self, files, capsys):
        m = files["dir"] / "f.json"
        m.write_text(json.dumps({"x_labels": ["a", "b", "c"], "prior": [0.3, 0.3, 0.4],
                                 "channel": [[0.9, 0.1], [0.8, 0.2], [0.1, 0.9]],
                                 "features": [[0], [0], [1]]}))
        assert run("bounds", m, "--distortion", "feature") == EXIT_OK
        assert run("bounds", files["model"], "--distortion", "feature") == EXIT_USAGE

    def test_module_entry_point_logs_config(self, files):
        res = subprocess.run([sys.executable, "-m", "pdtradeoff", "bounds", str(files["model"])],
                             capture_output=True, text=True)
        assert res.returncode == 0
        assert '"subcommand": "bounds"' in res.stderr
