"""Time-domain oracle for the two-diode voltage doubler.

Topology (node names used in the netlist builder)::

    src --Rsrc-- in --C1-- x --Rs-- d2 --|>|-- out --+-- C2 -- gnd
                           |                         +-- R_L -- gnd
                           ^  D1 junction (anode d1, cathode x)
                           d1 --Rs-- gnd

D1 clamps node ``x`` from ground, D2 rectifies into the output. Both junctions use the exact exponential law with the
depletion charge of the diode module; C1 and C2 are ideal.

Optionally an E-CRLH matching cell is inserted between the Thevenin source
and ``in``.

The integrator is trapezoidal on charges with a single backward-Euler
start-up step; each step solves a 2x2 Newton system on the junction
voltages. Integration proceeds in whole periods of the tone set's base
frequency until the period-averaged load current stops drifting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernel
from .diode import DiodeParams, alpha as diode_alpha
from .ecrlh import ECRLHParams
from .errors import ContractError, StepFailure, UsageError

GRID_HZ = 50e6
PF = 1e-12
FC = 0.5


@dataclass(frozen=True)
class RectifierCircuit:
    """Two-diode voltage doubler.

    The 100 pF defaults for ``c1``/``c2`` are a toolkit choice, not
    measured board values.
    """

    c1: float = 100 * PF
    c2: float = 100 * PF
    r_l: float = 11e3
    diode: DiodeParams = field(default_factory=DiodeParams)
    z_source: float = 50.0

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ContractError("c1 and c2 must be positive")
        if not self.r_l > 0:
            raise ContractError("r_l must be positive")
        if not self.z_source > 0:
            raise ContractError("z_source must be positive")

    def replace(self, **kw) -> "RectifierCircuit":
        d = dict(c1=self.c1, c2=self.c2, r_l=self.r_l, diode=self.diode, z_source=self.z_source)
        d.update(kw)
        return RectifierCircuit(**d)


@dataclass(frozen=True)
class Tone:
    freq: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class ToneSet:
    tones: tuple
    base_freq: float

    def __post_init__(self):
        tones = tuple(self.tones)
        object.__setattr__(self, "tones", tones)
        if not self.base_freq > 0:
            raise ContractError("base_freq must be positive")
        for t in tones:
            if t.amplitude < 0:
                raise ContractError(f"negative amplitude at {t.freq} Hz")
            ratio = t.freq / self.base_freq
            if t.freq <= 0 or abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                raise UsageError(
                    f"tone at {t.freq!r} Hz is not a multiple of the base frequency {self.base_freq!r} Hz"
                )

    @property
    def f_max(self) -> float:
        return max(t.freq for t in self.tones)

    def scaled(self, factor: float) -> "ToneSet":
        return ToneSet(
            tuple(Tone(t.freq, t.amplitude * factor, t.phase) for t in self.tones), self.base_freq
        )

    def waveform(self, t):
        t = np.asarray(t, dtype=float)
        v = np.zeros_like(t)
        for tone in self.tones:
            v += tone.amplitude * np.cos(2 * math.pi * tone.freq * t + tone.phase)
        return v

    @staticmethod
    def merge(*sets: "ToneSet") -> "ToneSet":
        tones = [t for s in sets for t in s.tones]
        base = _gcd_freq([s.base_freq for s in sets])
        _check_unique(tones)
        return ToneSet(tuple(tones), base)


@dataclass(frozen=True)
class SimOptions:
    steps_per_period_of_fmax: int = 200
    max_cycles: int = 2000
    dc_drift_tol: float = 1e-5
    newton_tol: float = 1e-10
    newton_max_iter: int = 50

    def __post_init__(self):
        for name in ("steps_per_period_of_fmax", "max_cycles", "dc_drift_tol", "newton_tol", "newton_max_iter"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")


@dataclass
class TransientResult:
    t: np.ndarray
    v_j1: np.ndarray
    v_j2: np.ndarray
    i_l: np.ndarray
    i_dc: float
    v_dc: float
    p_dc: float
    converged: bool
    cycles_used: int
    i_c2_avg: float = 0.0
    v_in: Optional[np.ndarray] = None
    i_in: Optional[np.ndarray] = None
    history: list = field(default_factory=list)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def thevenin_amplitude(p_avail: float, z0: float) -> float:
    """Peak Thevenin voltage delivering ``p_avail`` into a conjugate load."""
    return math.sqrt(8.0 * z0 * p_avail)


def _gcd_freq(freqs, quantum=1.0):
    ints = [int(round(f / quantum)) for f in freqs]
    g = 0
    for i in ints:
        g = math.gcd(g, i)
    return g * quantum


def _check_unique(tones):
    seen = set()
    for t in tones:
        key = round(t.freq)
        if key in seen:
            raise UsageError(f"duplicate tone at {t.freq!r} Hz")
        seen.add(key)


def build_source(per_tone_dbm: Sequence, z0: float = 50.0, grid_hz: float = GRID_HZ) -> ToneSet:
    """Tone set from (frequency, available dBm) pairs.

    Frequencies snap to multiples of ``grid_hz``; the grid quantum is the
    base frequency, so the excitation repeats every ``1/grid_hz`` seconds.
    """
    if not z0 > 0:
        raise ContractError("z0 must be positive")
    if not grid_hz > 0:
        raise ContractError("grid_hz must be positive")
    tones = []
    for item in per_tone_dbm:
        f, dbm = item[0], item[1]
        phase = item[2] if len(item) > 2 else 0.0
        k = round(f / grid_hz)
        if k < 1:
            raise UsageError(f"tone at {f!r} Hz snaps below the {grid_hz!r} Hz grid")
        amp = thevenin_amplitude(dbm_to_watts(dbm), z0)
        tones.append(Tone(k * grid_hz, amp, phase))
    _check_unique(tones)
    return ToneSet(tuple(tones), grid_hz)


# --------------------------------------------------------------------------
# netlist assembly


class _Netlist:
    def __init__(self):
        self.nodes = {}
        self.res = []
        self.caps = []
        self.inds = []

    def node(self, name):
        if name == "gnd":
            return -1
        if name not in self.nodes:
            self.nodes[name] = len(self.nodes)
        return self.nodes[name]

    def r(self, a, b, value):
        self.res.append((self.node(a), self.node(b), float(value)))

    def c(self, a, b, value, tag=None):
        self.caps.append((self.node(a), self.node(b), float(value), tag))

    def l(self, a, b, value):
        self.inds.append((self.node(a), self.node(b), float(value)))


def _stamp(g, p, q, val):
    if p >= 0:
        g[p, p] += val
    if q >= 0:
        g[q, q] += val
    if p >= 0 and q >= 0:
        g[p, q] -= val
        g[q, p] -= val


def _add_matching_cell(net: _Netlist, m: ECRLHParams, a: str, b: str):
    """Symmetric T: half series arm, shunt arm, half series arm."""

    def half(p, q, tag):
        net.l(p, f"{tag}1", m.l_r_c / 2)
        net.c(f"{tag}1", f"{tag}2", 2 * m.c_l_c)
        net.l(f"{tag}2", q, m.l_r_d / 2)
        net.c(f"{tag}2", q, 2 * m.c_l_d)

    half(a, "mid", "ha")
    net.c("mid", "gnd", m.c_r_c)
    net.l("mid", "gnd", m.l_l_c)
    net.l("mid", "sh1", m.l_l_d)
    net.c("sh1", "gnd", m.c_r_d)
    half("mid", b, "hb")


def _build(circuit: RectifierCircuit, matching: Optional[ECRLHParams]):
    net = _Netlist()
    # fix the order of the nodes that the kernel records
    for name in ("in", "x", "d1", "d2", "out"):
        net.node(name)
    src = "in"
    if matching is not None:
        src = "src"
        net.node("src")
        _add_matching_cell(net, matching, "src", "in")
    r_s = max(circuit.diode.r_s, 1e-6)
    net.c("in", "x", circuit.c1)
    net.r("gnd", "d1", r_s)
    net.r("x", "d2", r_s)
    net.c("out", "gnd", circuit.c2, tag="c2")
    net.r("out", "gnd", circuit.r_l)
    return net, src


@dataclass
class _Compiled:
    net: _Netlist
    src_node: int
    arrays: dict


def _companion_inverse(net, src_node, g_src, dt, kc, ind_scale):
    n = len(net.nodes)
    g = np.zeros((n, n))
    for p, q, r in net.res:
        _stamp(g, p, q, 1.0 / r)
    for p, q, c, _ in net.caps:
        _stamp(g, p, q, kc * c)
    for p, q, l in net.inds:
        _stamp(g, p, q, ind_scale * dt / l)
    g[src_node, src_node] += g_src
    e = np.zeros((n, 2))
    jn = [(net.nodes["d1"], net.nodes["x"]), (net.nodes["d2"], net.nodes["out"])]
    for k, (a, c) in enumerate(jn):
        e[a, k] += 1.0
        e[c, k] -= 1.0
    ainv = np.linalg.inv(g)
    zm = ainv @ e
    w = e.T @ zm
    return np.ascontiguousarray(ainv), np.ascontiguousarray(zm), np.ascontiguousarray(w)


def transient(
    c: RectifierCircuit,
    t: ToneSet,
    opts: SimOptions = SimOptions(),
    matching: Optional[ECRLHParams] = None,
    record_history: bool = False,
) -> TransientResult:
    """Integrate to periodic steady state and return the DC operating point."""
    if not t.tones:
        raise UsageError("tone set is empty")
    # re-validate commensuration in case the ToneSet was built by hand
    ToneSet(t.tones, t.base_freq)
    period = 1.0 / t.base_freq
    n_steps = int(math.ceil(opts.steps_per_period_of_fmax * t.f_max / t.base_freq))
    dt = period / n_steps

    net, src = _build(c, matching)
    src_node = net.node(src)
    g_src = 1.0 / c.z_source
    ainv_tr, zm_tr, w_tr = _companion_inverse(net, src_node, g_src, dt, 2.0 / dt, 0.5)
    ainv_be, zm_be, w_be = _companion_inverse(net, src_node, g_src, dt, 1.0 / dt, 1.0)

    n = len(net.nodes)
    cap_p = np.array([x[0] for x in net.caps], dtype=np.int64)
    cap_q = np.array([x[1] for x in net.caps], dtype=np.int64)
    cap_c = np.array([x[2] for x in net.caps], dtype=np.float64)
    cap_i = np.zeros(len(net.caps))
    c2_index = [k for k, x in enumerate(net.caps) if x[3] == "c2"][0]
    ind_p = np.array([x[0] for x in net.inds], dtype=np.int64)
    ind_q = np.array([x[1] for x in net.inds], dtype=np.int64)
    ind_l = np.array([x[2] for x in net.inds], dtype=np.float64)
    ind_i = np.zeros(len(net.inds))
    jn_a = np.array([net.nodes["d1"], net.nodes["d2"]], dtype=np.int64)
    jn_c = np.array([net.nodes["x"], net.nodes["out"]], dtype=np.int64)
    jq = np.zeros(2)
    jicap = np.zeros(2)
    x = np.zeros(n)

    tgrid = np.arange(n_steps) * dt
    src_wave = t.waveform(tgrid)
    rec_p = np.array([net.nodes["d1"], net.nodes["d2"], net.nodes["out"], net.nodes["in"]], dtype=np.int64)
    rec_q = np.array([net.nodes["x"], net.nodes["out"], -1, -1], dtype=np.int64)
    rec_buf = np.zeros((len(rec_p), n_steps))

    d = c.diode
    a = diode_alpha(d)
    prev = None
    converged = False
    history = []
    cycles = 0
    avg_il = avg_ic2 = 0.0
    for cycle in range(opts.max_cycles):
        status, bad, avg_il, avg_ic2 = _kernel.integrate(
            n_steps, 0, dt, cycle == 0,
            ainv_tr, zm_tr, w_tr, ainv_be, zm_be, w_be,
            cap_p, cap_q, cap_c, cap_i,
            ind_p, ind_q, ind_l, ind_i,
            src_node, g_src, src_wave,
            jn_a, jn_c, jq, jicap,
            d.i_s, a, d.c_j0, d.v_j, FC, d.b_v, d.i_bv,
            x, opts.newton_tol, opts.newton_max_iter,
            rec_p, rec_q, rec_buf,
            net.nodes["out"], c.r_l, c2_index,
        )
        cycles = cycle + 1
        if status != _kernel.STATUS_OK:
            when = (cycle * n_steps + bad + 1) * dt
            raise StepFailure(f"Newton failed to converge at t = {when:.6e} s", time=when)
        if record_history:
            history.append(avg_il)
        tol = opts.dc_drift_tol * abs(avg_il)
        # C2 must also carry no net charge, else the output is still charging
        if prev is not None and abs(avg_il - prev) <= tol and abs(avg_ic2) <= tol:
            converged = True
            break
        prev = avg_il

    t_out = (np.arange(n_steps) + 1) * dt + (cycles - 1) * period
    v_in = rec_buf[3].copy()
    src_samples = np.roll(src_wave, -1)
    i_in = None
    if matching is None:
        i_in = (src_samples - v_in) * g_src
    i_dc = float(avg_il)
    v_dc = c.r_l * i_dc
    return TransientResult(
        t=t_out,
        v_j1=rec_buf[0].copy(),
        v_j2=rec_buf[1].copy(),
        i_l=rec_buf[2] / c.r_l,
        i_dc=i_dc,
        v_dc=v_dc,
        p_dc=v_dc * i_dc,
        converged=converged,
        cycles_used=cycles,
        i_c2_avg=float(avg_ic2),
        v_in=v_in,
        i_in=i_in,
        history=history,
    )


def fundamental_phasor(samples: np.ndarray, t: np.ndarray, f: float) -> complex:
    """Single-bin Fourier projection over an integer number of cycles."""
    return complex(2.0 / len(samples) * np.sum(samples * np.exp(-2j * math.pi * f * t)))


def large_signal_zin(
    c: RectifierCircuit,
    f: float,
    p_avail: float,
    opts: SimOptions = SimOptions(),
    grid_hz: float = GRID_HZ,
) -> complex:
    """Fundamental-frequency input impedance under single-tone drive."""
    if not p_avail > 0:
        raise ContractError("p_avail must be positive")
    dbm = 10 * math.log10(p_avail) + 30
    tones = build_source([(f, dbm)], c.z_source, grid_hz)
    res = transient(c, tones, opts)
    f_snapped = tones.tones[0].freq
    v1 = fundamental_phasor(res.v_in, res.t, f_snapped)
    i1 = fundamental_phasor(res.i_in, res.t, f_snapped)
    return v1 / i1


def small_signal_zin(c: RectifierCircuit, f: float) -> complex:
    """Linearised input impedance at zero bias (both junctions g = i_s*alpha)."""
    d = c.diode
    w = 2 * math.pi * f
    yj = d.i_s * diode_alpha(d) + 1j * w * d.c_j0
    zd = d.r_s + 1 / yj
    z_out = 1 / (1 / c.r_l + 1j * w * c.c2)
    branch2 = zd + z_out
    return 1 / (1j * w * c.c1) + 1 / (1 / zd + 1 / branch2)
