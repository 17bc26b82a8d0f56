import math

import numpy as np
import pytest

from qbeh.diode import alpha
from qbeh.ecrlh import REFERENCE_CELL
from qbeh.errors import ContractError, StepFailure, UsageError
from qbeh.sim import (
    RectifierCircuit,
    SimOptions,
    Tone,
    ToneSet,
    build_source,
    dbm_to_watts,
    large_signal_zin,
    small_signal_zin,
    transient,
)
from qbeh.volterra import KernelContext, dc_closed_form

RECT = RectifierCircuit()
REF_TONE = build_source([(2.4e9, -30.0)])


@pytest.fixture(scope="module")
def ref_run():
    return transient(RECT, REF_TONE)


def test_build_source_examples():
    t = build_source([(2.4e9, -20.0)])
    assert t.tones[0].amplitude == pytest.approx(63.25e-3, rel=1e-4)
    assert t.base_freq == 50e6
    assert build_source([(0.75e9, -30.0)]).tones[0].amplitude == pytest.approx(20e-3, rel=1e-12)
    assert build_source([(1e9, -math.inf)]).tones[0].amplitude == 0.0
    snapped = build_source([(2.41e9, -30.0)])
    assert snapped.tones[0].freq == 2.4e9


def test_build_source_errors():
    with pytest.raises(UsageError):
        build_source([(2.4e9, -30.0), (2.41e9, -30.0)])
    with pytest.raises(ContractError):
        build_source([(2.4e9, -30.0)], z0=0)


def test_tone_set_commensuration():
    with pytest.raises(UsageError):
        ToneSet((Tone(1.23e9, 0.1),), 50e6)
    with pytest.raises(ContractError):
        ToneSet((Tone(1e9, -0.1),), 50e6)


def test_zero_drive_is_equilibrium():
    r = transient(RECT, ToneSet((Tone(2.4e9, 0.0),), 50e6))
    assert r.i_dc == 0.0 and r.v_dc == 0.0 and r.p_dc == 0.0


def test_reference_run_consistency(ref_run):
    r = ref_run
    assert r.converged and r.cycles_used < SimOptions().max_cycles
    assert r.i_dc > 0
    assert r.v_dc == pytest.approx(RECT.r_l * r.i_dc, rel=1e-12)
    assert r.p_dc == pytest.approx(r.v_dc * r.i_dc, rel=1e-12)
    # last-period average of the recorded load current
    assert np.mean(r.i_l) == pytest.approx(r.i_dc, rel=1e-6)


def test_c2_carries_no_dc(ref_run):
    assert abs(ref_run.i_c2_avg) < SimOptions().dc_drift_tol * ref_run.i_dc


def test_step_halving(ref_run):
    fine = transient(RECT, REF_TONE, SimOptions(steps_per_period_of_fmax=400))
    assert abs(fine.i_dc - ref_run.i_dc) / fine.i_dc < 5e-3


def test_closed_form_cross_check(ref_run):
    cf = dc_closed_form(KernelContext(RECT.diode, RECT, REF_TONE)).i_dc
    assert abs(cf - ref_run.i_dc) / ref_run.i_dc < 0.15


def test_square_law_doubling():
    # -46 dBm keeps alpha*|v_j| under 0.3 even after doubling
    base = build_source([(2.4e9, -46.0)])
    small = transient(RECT, base)
    big = transient(RECT, base.scaled(2.0))
    a = alpha(RECT.diode)
    assert a * max(np.max(np.abs(big.v_j1)), np.max(np.abs(big.v_j2))) < 0.3
    assert big.i_dc / small.i_dc == pytest.approx(4.0, rel=0.2)


def test_newton_failure_reports_time():
    with pytest.raises(StepFailure) as e:
        transient(RECT, build_source([(2.4e9, 10.0)]), SimOptions(newton_max_iter=1, newton_tol=1e-300))
    assert e.value.time is not None and e.value.time > 0


def test_large_signal_zin_properties():
    z30 = large_signal_zin(RECT, 2.4e9, dbm_to_watts(-30))
    z0 = large_signal_zin(RECT, 2.4e9, dbm_to_watts(0))
    assert z30.real > 0 and z0.real > 0
    assert abs(z30 - z0) / abs(z30) > 0.05
    with pytest.raises(ContractError):
        large_signal_zin(RECT, 2.4e9, 0.0)


@pytest.mark.parametrize("f", [0.75e9, 2.4e9, 5.8e9])
def test_low_power_zin_matches_linearised(f):
    z = large_signal_zin(RECT, f, dbm_to_watts(-50))
    zs = small_signal_zin(RECT, f)
    assert abs(z - zs) / abs(zs) < 0.05


def test_dc_power_monotone_in_drive():
    p = [transient(RECT, build_source([(2.4e9, dbm)])).p_dc for dbm in (-50, -40, -30, -20, -10)]
    assert all(b >= a for a, b in zip(p, p[1:]))


def test_matching_cell_in_circuit_runs():
    r = transient(RECT, REF_TONE, matching=REFERENCE_CELL)
    assert r.converged and r.i_dc > 0 and r.i_in is None
