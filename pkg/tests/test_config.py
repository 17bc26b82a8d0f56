import json

import pytest

from qbeh.config import Config, load_config, parse_config
from qbeh.errors import ConfigError
from qbeh.sim import PF


def test_defaults():
    cfg = parse_config({})
    rect = cfg.rectifier()
    assert rect.r_l == 11e3 and rect.z_source == 50.0
    assert rect.c1 == pytest.approx(100 * PF)
    assert cfg.bands.hz == (0.75e9, 1.8e9, 2.4e9, 5.8e9)
    assert cfg.ecrlh is None
    assert cfg.excitation.sttp_threshold_w == 20e-6


def test_unknown_keys_reported_with_paths():
    with pytest.raises(ConfigError) as e:
        parse_config({"colour": 1, "diode": {"i_s": 1e-6}, "sim": {"steps": 3}})
    paths = {p.split(":")[0] for p in e.value.problems}
    assert {"colour", "diode.i_s", "sim.steps"} <= paths


def test_every_violation_reported():
    bad = {
        "circuit": {"r_l_ohm": -1},
        "bands": {"freqs_ghz": [1, 2, 3]},
        "synthesis": {"l_bounds_nh": [5, 1]},
        "optimize": {"c1_bounds_pf": [0, 10], "variables": []},
        "s11": {"f_start_ghz": 3, "f_stop_ghz": 1},
    }
    with pytest.raises(ConfigError) as e:
        parse_config(bad)
    text = "\n".join(e.value.problems)
    for path in ("circuit.r_l_ohm", "bands.freqs_ghz", "synthesis.l_bounds_nh",
                 "optimize.c1_bounds_pf", "optimize.variables", "s11"):
        assert path in text


def test_bands_must_increase():
    with pytest.raises(ConfigError):
        parse_config({"bands": {"freqs_ghz": [2.4, 1.8, 0.75, 5.8]}})


def test_ecrlh_block_units():
    cell = parse_config({"ecrlh": {
        "l_r_c_nh": 9.6, "c_l_c_pf": 0.2, "l_l_c_nh": 49.4, "c_r_c_pf": 0.04,
        "l_r_d_nh": 11, "c_l_d_pf": 0.48, "l_l_d_nh": 120.7, "c_r_d_pf": 0.04,
    }}).ecrlh.build()
    assert cell.l_r_c == pytest.approx(9.6e-9)
    assert cell.c_r_d == pytest.approx(0.04e-12)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 9}))
    assert load_config(p).seed == 9
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")


def test_sim_block_builds_options():
    opts = Config(sim={"steps_per_period_of_fmax": 64}).sim.build()
    assert opts.steps_per_period_of_fmax == 64
