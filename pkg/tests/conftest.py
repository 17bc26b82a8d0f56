import math
import os

import pytest
from hypothesis import settings

from qbeh.metrics import BANDS
from qbeh.sim import RectifierCircuit, SimOptions, dbm_to_watts, large_signal_zin

settings.register_profile("qbeh", deadline=None, max_examples=60, derandomize=True)
settings.register_profile("stress", deadline=None, max_examples=2000)
settings.load_profile(os.environ.get("QBEH_HYPOTHESIS_PROFILE", "qbeh"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rect():
    return RectifierCircuit()


@pytest.fixture(scope="session")
def z_load_30dbm(rect):
    """Large-signal rectifier input impedance at the four band centres, -30 dBm."""
    p = dbm_to_watts(-30.0)
    return tuple(large_signal_zin(rect, f, p, SimOptions()) for f in BANDS)


@pytest.fixture(scope="session")
def design_synthesis(z_load_30dbm):
    from qbeh.synth import SynthesisProblem, synthesize

    prob = SynthesisProblem(bands=BANDS, z_load=z_load_30dbm)
    return prob, synthesize(prob)


def rel(a, b):
    return abs(a - b) / abs(b) if b else math.inf


# Reduced-cost run configuration for CLI tests: explicit matching cell,
# short sweeps, coarse time step and a small search budget.
SMALL_CONFIG = {
    "seed": 3,
    "ecrlh": {
        "l_r_c_nh": 9.6, "c_l_c_pf": 0.2, "l_l_c_nh": 49.4, "c_r_c_pf": 0.04,
        "l_r_d_nh": 11.0, "c_l_d_pf": 0.48, "l_l_d_nh": 120.7, "c_r_d_pf": 0.04,
    },
    "synthesis": {"n_starts": 4},
    "excitation": {"sweep_dbm": [-30.0, -20.0], "point_dbm": -30.0},
    "sim": {"steps_per_period_of_fmax": 100},
    "s11": {"n_points": 41},
    "optimize": {"budget": 20, "dbm_list": [-30.0]},
}


def write_config(directory, data=None):
    import json

    path = directory / "run.json"
    path.write_text(json.dumps(SMALL_CONFIG if data is None else data))
    return path


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}
