"""End-to-end CLI tests: exit codes, JSON errors, file outputs."""

import json
import math

import numpy as np
import pytest

from vhbilliards.cli import main
from vhbilliards.geometry import load_table, lshape, save_table, unit_square


@pytest.fixture
def square_file(tmp_path):
    path = tmp_path / "square.json"
    save_table(unit_square(), path)
    return str(path)


@pytest.fixture
def lshape_file(tmp_path):
    path = tmp_path / "lshape.json"
    save_table(lshape(), path)
    return str(path)


@pytest.fixture
def broken_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({
        "outer": {"word": "ENWS", "lengths": ["1/1", "1/1", "2/1", "1/1"]},
        "holes": [],
    }))
    return str(path)


class TestValidate:
    def test_lshape(self, lshape_file, capsys):
        assert main(["validate", lshape_file]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["word"] == "ENWNWS"
        assert out["area"] == "3"
        assert out["p"] == 1 and out["q"] == 1

    def test_closure_violation_exits_1(self, broken_file, capsys):
        assert main(["validate", broken_file]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ClosureViolated"

    def test_missing_file_exits_1(self, capsys):
        assert main(["validate", "/nonexistent/table.json"]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "FileNotFoundError"


class TestTile:
    def test_counts(self, lshape_file, capsys):
        assert main(["tile", lshape_file, "--list"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["tile_count"] == 3
        assert len(out["anchors"]) == 3


class TestApproximate:
    def test_writes_snapped_table(self, lshape_file, tmp_path, capsys):
        out_path = str(tmp_path / "snapped.json")
        code = main(["approximate", lshape_file, "--Q", "5", "--eta", "0.2",
                     "-o", out_path])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert min(out["p"], out["q"]) >= 5
        snapped = load_table(out_path)
        assert snapped.outer.word.render() == "ENWNWS"


class TestOrbit:
    def test_csv_and_svg(self, lshape_file, tmp_path, capsys):
        csv_path = tmp_path / "orbit.csv"
        svg_path = tmp_path / "orbit.svg"
        code = main(["orbit", lshape_file, "--theta", "1.0",
                     "--x", "1.3", "--y", "1.4", "--time", "8.0",
                     "--csv", str(csv_path), "--svg", str(svg_path)])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["events"] > 0
        assert csv_path.read_text().startswith("t,x,y,sx,sy,side_id")
        assert svg_path.read_text().startswith("<svg")

    def test_singular_orbit_reported(self, lshape_file, capsys):
        code = main(["orbit", lshape_file, "--theta",
                     repr(math.pi / 4), "--x", "1.5", "--y", "1.5",
                     "--time", "5.0"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["terminated"] == "singular"


class TestCorrelate:
    def test_matches_closed_form(self, square_file, tmp_path, capsys):
        out_csv = str(tmp_path / "series.csv")
        m = 32
        code = main(["correlate", square_file, "--theta", "1.0",
                     "--h", "1,0", "--tmax", "10", "--step", "0.5",
                     "--m", str(m), "-o", out_csv,
                     "--summary", str(tmp_path / "summary.json"),
                     "--svg", str(tmp_path / "gap.svg")])
        assert code == 0
        assert (tmp_path / "gap.svg").read_text().startswith("<svg")
        rows = [line.split(",") for line in
                open(out_csv).read().strip().splitlines()[1:]]
        t = np.array([float(r[0]) for r in rows])
        c = np.array([float(r[1]) for r in rows])
        expected = 0.5 * np.cos(2 * math.pi * t * math.cos(1.0))
        assert np.abs(c - expected).max() <= 3.0 / m
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["grid_m"] == m
        assert summary["pi_commensurable"] is False

    def test_too_many_singular_exits_2(self, lshape_file, capsys):
        code = main(["correlate", lshape_file, "--theta", repr(math.pi / 4),
                     "--h", "1,0", "--tmax", "3", "--step", "1.0",
                     "--m", "2"])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "TooManySingular"


class TestThetaSweepCommand:
    def test_outputs(self, square_file, tmp_path, capsys):
        config = {
            "table_path": square_file,
            "count": 6,
            "seed": 3,
            "n_gap": 4,
            "tau": 12.0,
            "h_indices": [6],
            "grid_m": 4,
            "out_dir": str(tmp_path / "sweep_out"),
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["theta-sweep", str(cfg_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert "6" in out["measures"]
        sweep_csv = tmp_path / "sweep_out" / "sweep.csv"
        summary = json.loads(
            (tmp_path / "sweep_out" / "sweep_summary.json").read_text())
        assert sweep_csv.exists()
        assert summary["seed"] == 3
        assert summary["table"]["outer"]["word"] == "ENWS"

    def test_bad_config_exits_1(self, square_file, tmp_path, capsys):
        config = {"table_path": square_file, "count": 4, "seed": 0,
                  "n_gap": 10, "tau": 5.0, "h_indices": [1], "grid_m": 4}
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["theta-sweep", str(cfg_path)]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ConfigError"


class TestContinuityCommand:
    def test_compares_tables(self, lshape_file, tmp_path, capsys):
        from fractions import Fraction
        from vhbilliards.lab import perturb_length

        other = perturb_length(lshape(), 0, Fraction(1, 50))
        other_path = tmp_path / "other.json"
        save_table(other, other_path)
        code = main(["continuity", lshape_file, str(other_path),
                     "--theta", "1.0", "--h", "1,0", "--t", "2.0,5.0",
                     "--m", "8"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["distance"] == 0.02
        assert len(out["delta_c"]) == 2

    def test_mismatch_exits_1(self, square_file, lshape_file, capsys):
        code = main(["continuity", square_file, lshape_file,
                     "--theta", "1.0", "--h", "1,0", "--t", "1.0",
                     "--m", "4"])
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "CombinatoricsMismatch"


class TestGDeltaCommand:
    def test_runs_and_writes(self, tmp_path, capsys):
        config = {
            "word": "ENWS",
            "area_band": [0.5, 30],
            "q_list": [2],
            "j_max": 1,
            "n_list": [2],
            "grid_m": 4,
            "seed": 1,
            "theta_count": 4,
            "out_dir": str(tmp_path / "gd"),
        }
        cfg_path = tmp_path / "gd.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["gdelta-demo", str(cfg_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["rows"] == 1
        assert (tmp_path / "gd" / "gdelta.csv").exists()
        assert (tmp_path / "gd" / "gdelta_summary.json").exists()


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
