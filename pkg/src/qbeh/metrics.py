"""Efficiency bookkeeping, power sweeps, multi-tone excitation and STTP."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import io as qio
from .ecrlh import ECRLHParams, cell_abcd
from .errors import ContractError, NumericalError, UsageError
from .netcore import terminate
from .sim import (
    GRID_HZ,
    RectifierCircuit,
    SimOptions,
    Tone,
    ToneSet,
    _gcd_freq,
    dbm_to_watts,
    small_signal_zin,
    thevenin_amplitude,
    transient,
)
from .volterra import KernelContext, dc_closed_form

BANDS = (0.75e9, 1.8e9, 2.4e9, 5.8e9)
DEFAULT_SPACING = 5e6

CSV_HEADER = (
    "scenario", "per_tone_dbm", "total_in_w", "p_b_w", "p_dc_w",
    "v_dc_v", "eta_mn", "eta_rec", "eta_oc", "eta_effective",
)


@dataclass(frozen=True)
class EfficiencyReport:
    eta_mn: float
    eta_rec: float
    eta_oc: float
    eta_os: float
    eta_effective: float


def efficiencies(p_a: float, p_b: float, p_dc: float, eta_ant: float = 1.0, per_band_in: Optional[float] = None) -> EfficiencyReport:
    """Matching, rectifier, overall-circuit, overall-system and effective efficiency.

    ``eta_oc`` is formed as the product eta_mn * eta_rec so the identity is
    exact in floating point.
    """
    if not p_a > 0:
        raise ContractError("p_a must be positive")
    if not p_b >= 0 or not p_dc >= 0:
        raise ContractError("p_b and p_dc must be non-negative")
    if p_b > p_a:
        raise ContractError(f"energy conservation violated: delivered {p_b!r} W exceeds available {p_a!r} W")
    if not 0 < eta_ant <= 1:
        raise ContractError("eta_ant must lie in (0, 1]")
    per_band_in = p_a if per_band_in is None else per_band_in
    if not per_band_in > 0:
        raise ContractError("per_band_in must be positive")
    eta_mn = p_b / p_a
    eta_rec = p_dc / p_b if p_b > 0 else 0.0
    eta_oc = eta_mn * eta_rec
    return EfficiencyReport(
        eta_mn=eta_mn,
        eta_rec=eta_rec,
        eta_oc=eta_oc,
        eta_os=eta_oc * eta_ant,
        eta_effective=p_dc / per_band_in,
    )


# --------------------------------------------------------------------------
# excitation


@dataclass(frozen=True)
class Scenario:
    """Excitation layout: ``single_band`` (one centre), ``quad_band`` or ``multitone``."""

    kind: str
    freq: Optional[float] = None
    bands: tuple = BANDS
    n_per_band: int = 1
    spacing: float = DEFAULT_SPACING

    def __post_init__(self):
        if self.kind not in ("single_band", "quad_band", "multitone"):
            raise UsageError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "single_band" and not (self.freq and self.freq > 0):
            raise ContractError("single_band scenario needs a positive freq")
        if not (isinstance(self.n_per_band, int) and self.n_per_band >= 1):
            raise ContractError("n_per_band must be a positive integer")

    @property
    def tag(self) -> str:
        if self.kind == "single_band":
            return f"single_band({self.freq:g})"
        if self.kind == "quad_band":
            return "quad_band"
        return f"multitone({self.n_per_band})"

    @property
    def tones_per_band(self) -> int:
        return self.n_per_band if self.kind == "multitone" else 1

    def tones(self, per_tone_dbm: float, z0: float = 50.0) -> ToneSet:
        if self.kind == "single_band":
            return multitone_scenario(1, (self.freq,), 0.0, per_tone_dbm, z0)
        n = self.n_per_band if self.kind == "multitone" else 1
        return multitone_scenario(n, self.bands, self.spacing, per_tone_dbm, z0)


def multitone_scenario(
    n_per_band: int,
    bands: Sequence[float],
    spacing: float,
    per_tone_dbm: float,
    z0: float = 50.0,
) -> ToneSet:
    """Symmetric comb of ``n_per_band`` equal tones around every band centre.

    Tone k sits at centre + (k - (n-1)/2) * spacing. All frequencies must be
    whole hertz; the base frequency is their greatest common divisor with
    the default grid.
    """
    if not (isinstance(n_per_band, int) and n_per_band >= 1):
        raise ContractError("n_per_band must be a positive integer")
    bands = sorted(float(b) for b in bands)
    if not bands or bands[0] <= 0:
        raise ContractError("bands must be positive")
    if n_per_band > 1 and not spacing > 0:
        raise ContractError("spacing must be positive")
    width = (n_per_band - 1) * spacing
    for lo, hi in zip(bands, bands[1:]):
        if hi - lo <= width:
            raise UsageError(f"tone combs around {lo:g} Hz and {hi:g} Hz overlap")
    amp = thevenin_amplitude(dbm_to_watts(per_tone_dbm), z0)
    freqs = []
    for c in bands:
        for k in range(n_per_band):
            f = c + (k - (n_per_band - 1) / 2) * spacing
            if f <= 0 or abs(f - round(f)) > 1e-6:
                raise UsageError(f"tone at {f!r} Hz is not on the 1 Hz commensuration grid")
            freqs.append(float(round(f)))
    # never coarser than the default grid, so periods stay short
    base = _gcd_freq(freqs + [GRID_HZ])
    return ToneSet(tuple(Tone(f, amp, 0.0) for f in freqs), base)


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    per_tone_dbm: float
    total_in_w: float
    p_b_w: float
    p_dc_w: float
    v_dc: float
    eta_mn: float
    eta_rec: float
    eta_oc: float
    eta_effective: float
    valid: bool = True
    error: str = ""

    def csv_row(self):
        return (
            self.scenario, self.per_tone_dbm, self.total_in_w, self.p_b_w, self.p_dc_w,
            self.v_dc, self.eta_mn, self.eta_rec, self.eta_oc, self.eta_effective,
        )


def delivered_power(circuit: RectifierCircuit, matching: Optional[ECRLHParams], tones: ToneSet, z0: float) -> float:
    """Available power minus mismatch loss, tone by tone.

    The rectifier side of the matching plane is its linearised input
    impedance; the lossless cell makes mismatch the only loss.
    """
    total = 0.0
    for t in tones.tones:
        p_a = t.amplitude**2 / (8 * z0)
        z = small_signal_zin(circuit, t.freq)
        if matching is not None:
            z = terminate(cell_abcd(matching, t.freq), z)
        gamma = (z - z0) / (z + z0)
        total += p_a * (1 - abs(gamma) ** 2)
    return total


def _dc(circuit, matching, tones, engine, opts):
    if engine == "oracle":
        return transient(circuit, tones, opts, matching=matching).v_dc
    if engine == "closed_form":
        if matching is not None:
            raise UsageError("the closed-form engine models the bare rectifier only; use engine='oracle' with matching")
        return dc_closed_form(KernelContext(circuit.diode, circuit, tones)).v_dc
    raise UsageError(f"unknown engine {engine!r}")


def power_sweep(
    circuit: RectifierCircuit,
    matching: Optional[ECRLHParams],
    scenarios: Sequence[Scenario],
    dbm_list: Sequence[float],
    engine: str = "oracle",
    opts: SimOptions = SimOptions(),
    eta_ant: float = 1.0,
) -> list:
    """One row per (power, scenario), power ascending then scenario order."""
    if engine not in ("oracle", "closed_form"):
        raise UsageError(f"unknown engine {engine!r}")
    if isinstance(scenarios, Scenario):
        scenarios = [scenarios]
    z0 = circuit.z_source
    rows = []
    for dbm in sorted(float(d) for d in dbm_list):
        for sc in scenarios:
            tones = sc.tones(dbm, z0)
            p_tone = dbm_to_watts(dbm)
            p_a = p_tone * len(tones.tones)
            per_band = p_tone * sc.tones_per_band
            try:
                p_b = delivered_power(circuit, matching, tones, z0)
                v_dc = _dc(circuit, matching, tones, engine, opts)
                p_dc = v_dc * v_dc / circuit.r_l
                eff = efficiencies(p_a, p_b, p_dc, eta_ant, per_band)
                rows.append(SweepRow(
                    sc.tag, dbm, p_a, p_b, p_dc, v_dc,
                    eff.eta_mn, eff.eta_rec, eff.eta_oc, eff.eta_effective,
                ))
            except (NumericalError, ContractError) as e:
                nan = math.nan
                rows.append(SweepRow(sc.tag, dbm, p_a, nan, nan, nan, nan, nan, nan, nan, False, str(e)))
    return rows


def sweep_csv(rows) -> str:
    return qio.csv_text(CSV_HEADER, [r.csv_row() for r in rows])


def sttp(rows: Sequence[SweepRow], threshold: float) -> Optional[float]:
    """Lowest per-tone dBm at which p_dc reaches ``threshold``.

    Between the bracketing rows, log10(p_dc) is interpolated linearly in dBm.
    Invalid rows are skipped; None when the threshold is never reached.
    """
    pts = sorted((r.per_tone_dbm, r.p_dc_w) for r in rows if r.valid and math.isfinite(r.p_dc_w))
    prev = None
    for dbm, p in pts:
        if p >= threshold:
            if prev is None or threshold <= 0:
                return dbm
            d0, p0 = prev
            if p0 <= 0:
                return dbm
            y0, y1, yt = math.log10(p0), math.log10(p), math.log10(threshold)
            if y1 == y0:
                return dbm
            return d0 + (yt - y0) / (y1 - y0) * (dbm - d0)
        prev = (dbm, p)
    return None
