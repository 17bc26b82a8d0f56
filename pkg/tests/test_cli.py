import csv
import json

import pytest
from conftest import SMALL_CONFIG, snapshot, write_config

from qbeh import io as qio
from qbeh.cli import COMMANDS, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, run

EXPECTED_FILES = {
    "synth": {"synth_result.json", "synth_s11.csv"},
    "s11": {"s11.csv"},
    "zin": {"zin.csv"},
    "transient": {"transient.csv", "transient.json"},
    "dc": {"dc.json"},
    "sweep": {"sweep.csv"},
    "sttp": {"sttp.json", "sttp_sweep.csv"},
    "optimize": {"optimize_trace.csv", "optimize_best.json"},
    "export-touchstone": {"matched.s1p"},
}


@pytest.mark.parametrize("command", COMMANDS)
def test_subcommand_byte_identical(tmp_path, command):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["--config", str(cfg), "--out", str(a), "--quiet", command]) == EXIT_OK
    assert run(["--config", str(cfg), "--out", str(b), "--quiet", command]) == EXIT_OK
    assert set(snapshot(a)) == EXPECTED_FILES[command]
    assert snapshot(a) == snapshot(b)


def test_missing_config_file(tmp_path, capsys):
    assert run(["--config", str(tmp_path / "nope.json"), "dc"]) == EXIT_IO
    assert "cannot read config" in capsys.readouterr().err


def test_missing_config_flag(capsys):
    assert run(["dc"]) == EXIT_CONFIG
    assert "--config" in capsys.readouterr().err


def test_unknown_subcommand(tmp_path):
    assert run(["--config", str(write_config(tmp_path)), "plot"]) == EXIT_CONFIG


def test_invalid_config_reports_paths_before_work(tmp_path, capsys):
    cfg = write_config(tmp_path, {"circuit": {"c1_pf": -3}, "extra": True})
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "--out", str(out), "transient"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "circuit.c1_pf" in err and "extra" in err
    assert not out.exists()


def test_numerical_failure_exit(tmp_path):
    data = dict(SMALL_CONFIG, sim={"newton_max_iter": 1, "newton_tol": 1e-300}, excitation={"point_dbm": 10.0})
    assert run(["--config", str(write_config(tmp_path, data)), "--out", str(tmp_path / "o"), "--quiet", "transient"]) == EXIT_NUMERICAL


def test_seed_flag_matches_config_seed(tmp_path):
    cfg = write_config(tmp_path)
    assert run(["--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "3", "--quiet", "synth"]) == EXIT_OK
    assert run(["--config", str(cfg), "--out", str(tmp_path / "b"), "--quiet", "synth"]) == EXIT_OK
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_output_formats(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "--out", str(out), "--quiet", "export-touchstone"]) == EXIT_OK
    lines = (out / "matched.s1p").read_text().splitlines()
    assert "# HZ S RI R 50" in lines
    freqs = [float(l.split()[0]) for l in lines if l and l[0] not in "!#"]
    assert freqs == sorted(freqs) and len(freqs) == SMALL_CONFIG["s11"]["n_points"]
    assert run(["--config", str(cfg), "--out", str(out), "--quiet", "dc"]) == EXIT_OK
    text = (out / "dc.json").read_text()
    doc = json.loads(text)
    assert list(doc) == sorted(doc)
    assert doc["i_dc_a"] > 0 and doc["scenario"] == "quad_band"
    assert run(["--config", str(cfg), "--out", str(out), "--quiet", "zin"]) == EXIT_OK
    with open(out / "zin.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["freq_hz", "p_dbm", "re_ohm", "im_ohm"]
    assert len(rows) == 1 + 4 * 2


def test_sttp_quad_below_single(tmp_path):
    data = dict(SMALL_CONFIG, excitation={"sweep_dbm": [-25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 5.0]})
    cfg = write_config(tmp_path, data)
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "--out", str(out), "--quiet", "sttp"]) == EXIT_OK
    doc = json.loads((out / "sttp.json").read_text())
    singles = [v for v in doc["single_band_sttp_dbm"].values() if v is not None]
    assert doc["sttp_dbm"] is not None and singles
    assert doc["sttp_dbm"] < min(singles)


def test_dc_and_transient_agree(tmp_path):
    data = dict(SMALL_CONFIG, excitation={"scenario": "single_band", "single_band_ghz": 2.4, "point_dbm": -30.0})
    cfg = write_config(tmp_path, data)
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "--out", str(out), "--quiet", "dc"]) == EXIT_OK
    assert run(["--config", str(cfg), "--out", str(out), "--quiet", "transient"]) == EXIT_OK
    cf = json.loads((out / "dc.json").read_text())["i_dc_a"]
    tr = json.loads((out / "transient.json").read_text())["i_dc_a"]
    assert abs(cf - tr) / tr < 0.15


def test_io_helpers(tmp_path):
    assert qio.fmt(0.1) == "0.1" and qio.fmt(float("nan")) == "nan" and qio.fmt(None) == ""
    assert qio.csv_text(("a", "b"), [(1, 2.5)]) == "a,b\r\n1,2.5\r\n"
    assert qio.json_text({"b": 1, "a": 1j}) == '{\n  "a": {\n    "im": 1.0,\n    "re": 0.0\n  },\n  "b": 1\n}\n'
    p = tmp_path / "deep" / "f.txt"
    qio.atomic_write_text(p, "x")
    assert p.read_text() == "x"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]
