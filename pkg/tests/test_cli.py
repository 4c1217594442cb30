import argparse
import csv
import json
import math
import warnings

import numpy as np
import pytest
import yaml

from pkgwave.cli import main, parse_axis, parse_band, parse_frequency
from pkgwave.sparams import SParameterSet, touchstone_read, touchstone_write

from conftest import SMALL


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture
def small_yaml(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


@pytest.fixture
def run_dir(tmp_path, small_yaml):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(small_yaml), "--out", str(out)]) == 0
    return out


class TestParsing:
    @pytest.mark.parametrize("text, hz", [("60e9", 60e9), ("60GHz", 60e9), ("1 THz", 1e12),
                                          ("500mhz", 5e8)])
    def test_frequency(self, text, hz):
        assert parse_frequency(text) == hz

    @pytest.mark.parametrize("text", ["abc", "-5GHz", "60 furlongs"])
    def test_bad_frequency(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_frequency(text)

    def test_band(self):
        assert parse_band("55GHz:65GHz") == (55e9, 65e9)

    @pytest.mark.parametrize("text", ["55e9", "65e9:55e9"])
    def test_bad_band(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_band(text)

    def test_axis(self):
        assert parse_axis("silicon=0.7e-3,0.1e-3") == ("silicon", [0.7e-3, 0.1e-3])
        assert parse_axis("spreader.material=aluminum_nitride") == (
            "spreader.material", ["aluminum_nitride"])


class TestSimulate:
    def test_two_port_touchstone(self, run_dir):
        sset = touchstone_read(run_dir / "sparams.s2p")
        assert sset.n_ports == 2
        assert sset.frequencies[0] <= 55e9 and sset.frequencies[-1] >= 65e9

    def test_metadata(self, run_dir):
        meta = json.loads((run_dir / "metadata.json").read_text())
        assert meta["config_hash"] == touchstone_read(run_dir / "sparams.s2p").metadata["config_hash"]
        assert meta["materials"]["silicon"]["pinned_conductivity"] == pytest.approx(10.0, rel=0.01)
        assert meta["conductivity_pinned_at_hz"] == 60e9
        assert len(meta["ports"]) == 2 and meta["grid"]["n_cells"] > 0
        assert all(r["steps"] > 0 for r in meta["runs"])
        assert (run_dir / "sparams_db.csv").is_file()

    def test_byte_identical_rerun(self, run_dir, small_yaml, tmp_path):
        again = tmp_path / "again"
        assert main(["simulate", "--config", str(small_yaml), "--out", str(again)]) == 0
        assert (run_dir / "sparams.s2p").read_bytes() == (again / "sparams.s2p").read_bytes()

    def test_resume_skips(self, run_dir, small_yaml, capsys):
        assert main(["simulate", "--config", str(small_yaml), "--out", str(run_dir), "--resume"]) == 0
        assert "up to date" in capsys.readouterr().out

    def test_invalid_config_fails_before_solve(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("package:\n  silicon: -0.001\n")
        out = tmp_path / "bad"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) != 0
        err = json.loads((out / "error.json").read_text())
        assert err["error"] == "config" and "thickness" in err["message"]
        assert not (out / "metadata.json").exists()

    def test_sizing_error_record(self, tmp_path, small_yaml):
        data = yaml.safe_load(small_yaml.read_text())
        data["solver"]["max_cells"] = 100
        cfg = tmp_path / "tiny.yaml"
        cfg.write_text(yaml.safe_dump(data))
        out = tmp_path / "tiny"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 1
        err = json.loads((out / "error.json").read_text())
        assert err["error"] == "sizing" and err["required_cells"] > 100

    def test_snapshots(self, tmp_path, small_yaml):
        data = yaml.safe_load(small_yaml.read_text())
        data["solver"]["snapshot_steps"] = [500]
        cfg = tmp_path / "snap.yaml"
        cfg.write_text(yaml.safe_dump(data))
        out = tmp_path / "snap"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "snapshots" / "port1" / "snapshot_0000500.bin").is_file()
        assert (out / "snapshots" / "port2" / "snapshot_0000500.bin").is_file()


class TestAnalyze:
    def test_run_directory(self, run_dir, capsys):
        assert main(["analyze", str(run_dir)]) == 0
        out = run_dir / "analysis"
        for name in ("smin.csv", "pairs.csv", "channel.csv", "summary.txt"):
            assert (out / name).is_file()
        assert "s_min_mean_db" in capsys.readouterr().out

    def test_hand_arithmetic(self, tmp_path):
        # S21 = S12 = 0.1, S11 = 0.2, S22 = 0.3 at every frequency
        f = np.array([55e9, 60e9, 65e9])
        s = np.tile(np.array([[0.2, 0.1], [0.1, 0.3]], dtype=complex), (3, 1, 1))
        path = touchstone_write(SParameterSet(f, s), tmp_path / "syn")
        out = tmp_path / "a"
        assert main(["analyze", str(path), "--out", str(out), "--spacing", "0.005"]) == 0
        with open(out / "channel.csv") as fh:
            row = next(csv.DictReader(fh))
        want = 10 * math.log10(0.01 / (0.96 * 0.91))
        assert float(row["gain_product_db"]) == pytest.approx(want, rel=1e-9)
        with open(out / "pairs.csv") as fh:
            pair = next(csv.DictReader(fh))
        assert float(pair["distance_m"]) == pytest.approx(0.005)
        assert float(pair["attenuation_db"]) == pytest.approx(-want, rel=1e-9)
        with open(out / "smin.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[0]["s_min_db"]) == pytest.approx(-20.0, rel=1e-9)

    def test_gains(self, tmp_path):
        f = np.array([59e9, 60e9, 61e9])
        s = np.tile(np.array([[0.2, 0.1], [0.1, 0.3]], dtype=complex), (3, 1, 1))
        path = touchstone_write(SParameterSet(f, s), tmp_path / "syn")
        out = tmp_path / "g"
        assert main(["analyze", str(path), "--out", str(out), "--band", "59GHz:61GHz",
                     "--spacing", "1e-3", "--tx-gain", "2", "--rx-gain", "5"]) == 0
        with open(out / "pairs.csv") as fh:
            pair = next(csv.DictReader(fh))
        assert float(pair["attenuation_db"]) == pytest.approx(
            -10 * math.log10(0.01 / (0.96 * 0.91)) + 10, rel=1e-9)

    def test_external_file(self, tmp_path):
        p = tmp_path / "vendor.s2p"
        p.write_text("! other solver\n# GHZ S DB R 50\n"
                     + "".join(f"{g} -3 0 -40 0 -40 0 -3 0\n" for g in (55, 60, 65)))
        assert main(["analyze", str(p), "--out", str(tmp_path / "v")]) == 0
        assert "skipped" in (tmp_path / "v" / "summary.txt").read_text()

    def test_band_outside_grid(self, run_dir, capsys):
        assert main(["analyze", str(run_dir), "--band", "70GHz:80GHz"]) == 1
        assert "band" in capsys.readouterr().err

    def test_mixed_hashes_refused(self, tmp_path):
        f = np.array([55e9, 65e9])
        s = np.full((2, 2, 2), 0.1, dtype=complex)
        a = touchstone_write(SParameterSet(f, s, metadata={"config_hash": "aaa"}), tmp_path / "a")
        b = touchstone_write(SParameterSet(f, s, metadata={"config_hash": "bbb"}), tmp_path / "b")
        out = tmp_path / "mixed"
        assert main(["analyze", str(a), str(b), "--out", str(out)]) == 1
        assert json.loads((out / "error.json").read_text())["error"] == "mixed_hash"
        assert main(["analyze", str(a), str(b), "--out", str(out), "--force"]) == 0
        assert (out / "a" / "smin.csv").is_file() and (out / "b" / "smin.csv").is_file()


class TestSweep:
    def test_grid_and_resume(self, tmp_path, small_yaml, capsys):
        args = ["sweep", "--config", str(small_yaml), "--axis", "silicon=0.489e-3,0.1e-3",
                "--axis", "spreader=0,0.25e-3"]
        full = tmp_path / "full"
        assert main(args + ["--out", str(full)]) == 0
        text = (full / "sweep.csv").read_text().splitlines()
        assert len(text) == 5
        assert "optimum:" in capsys.readouterr().out
        # simulate an interruption: keep two finished rows, out of order
        part = tmp_path / "part"
        part.mkdir()
        (part / "sweep.csv").write_text("\n".join([text[0], text[4], text[2]]) + "\n")
        assert main(args + ["--out", str(part), "--resume"]) == 0
        assert (part / "sweep.csv").read_bytes() == (full / "sweep.csv").read_bytes()

    def test_retune_column(self, tmp_path, small_yaml):
        out = tmp_path / "rt"
        assert main(["sweep", "--config", str(small_yaml), "--axis", "silicon=0.3e-3", "--retune",
                     "--out", str(out)]) == 0
        with open(out / "sweep.csv") as fh:
            row = next(csv.DictReader(fh))
        assert math.isfinite(float(row["s11_db"]))

    def test_failed_point_sets_exit_status(self, tmp_path, small_yaml):
        out = tmp_path / "f"
        assert main(["sweep", "--config", str(small_yaml), "--axis", "silicon=0.3e-3,-1",
                     "--out", str(out)]) == 1
        assert "failed" in (out / "sweep.csv").read_text()

    def test_no_axes(self, tmp_path, small_yaml):
        out = tmp_path / "none"
        assert main(["sweep", "--config", str(small_yaml), "--out", str(out)]) == 1
        assert json.loads((out / "error.json").read_text())["error"] == "sweep"


class TestValidate:
    def test_all_pass(self, tmp_path, capsys):
        assert main(["validate", "--quick", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "vacuum_delay_error" in out
        assert (tmp_path / "validation.txt").is_file()

    def test_bad_cfl_reported(self, capsys):
        assert main(["validate", "--quick", "--cfl-safety", "1.2"]) == 1
        assert "FAIL vacuum_stability" in capsys.readouterr().out

    def test_delay_converges(self, capsys):
        main(["validate", "--quick"])
        line = [l for l in capsys.readouterr().out.splitlines() if "vacuum_delay_error" in l][0]
        assert line.startswith("PASS") and "refined" in line
