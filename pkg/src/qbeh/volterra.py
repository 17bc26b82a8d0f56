"""Second-order Volterra / Laplace closed form for the doubler's DC output.

Two layers live here:

* the inverse (current-driven) junction kernels and the reference
  association-of-variables terms (``kernel_h1``, ``kernel_h2``,
  ``associated_terms``, ``f_terms``), kept verbatim for auditing;
* ``network_terms`` / ``dc_closed_form``, which assemble
  ``I_L(s) = (F2 V_i + F3_1 B_1 + F3_2 B_2 + A) / F1`` from the doubler's
  Laplace-domain nodal equations and take ``lim s->0 s I_L(s)`` by exact
  cancellation of powers of ``s``.

``B_k`` is the association-of-variables transform of junction k's
second-order source: with the first-order junction voltage
``v_k(t) = sum_m |V_km| cos(w_m t + psi_km)``,
``L[v_k^2](s) = sum_m sum_n |V_km||V_kn|/2 * [cos-transforms at w_m -+ w_n]``,
which for zero phases is the familiar ``(s/2) sum sum a_i a_j [...]`` double
sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diode import DiodeParams, alpha as diode_alpha
from .errors import NumericalError, PoleProximityError
from .rational import RationalS, RationalSum, poly_cofactor, poly_det
from .sim import RectifierCircuit, ToneSet


@dataclass(frozen=True)
class KernelContext:
    diode: DiodeParams
    circuit: RectifierCircuit
    tones: ToneSet

    @property
    def alpha(self) -> float:
        return diode_alpha(self.diode)

    @property
    def g1(self) -> float:
        return self.diode.i_s * self.alpha


def _cap_quad(ctx: KernelContext) -> float:
    # second-order capacitance coefficient: C0/(2 V0)
    return ctx.diode.c_j0 / (2.0 * ctx.diode.v_j)


def kernel_h1(ctx: KernelContext, s: complex) -> complex:
    den = ctx.g1 + ctx.diode.c_j0 * s
    if den == 0:
        raise PoleProximityError(f"H1 pole at s = {s!r}", "h1")
    return 1.0 / den


def kernel_h2(ctx: KernelContext, s1: complex, s2: complex) -> complex:
    """Second-order inverse kernel (coefficient of exp((s1+s2)t))."""
    d = ctx.diode
    outer = ctx.g1 + d.c_j0 * (s1 + s2)
    if outer == 0:
        raise PoleProximityError(f"H2 outer pole at s1+s2 = {s1 + s2!r}", "h2")
    num = _cap_quad(ctx) * (s1 + s2) + ctx.alpha**2 * d.i_s
    # multiply in a fixed order so the result is exactly symmetric
    h = kernel_h1(ctx, s1) * kernel_h1(ctx, s2)
    return -h * num / outer


def _prefactor(ctx: KernelContext) -> RationalS:
    d = ctx.diode
    num = RationalS([ctx.alpha**2 * d.i_s, _cap_quad(ctx)])
    den = RationalS([2 * ctx.g1, d.c_j0]) * RationalS([ctx.g1, d.c_j0])
    return num / den


def _cos_transform(amp: float, omega: float, phase: float) -> RationalS:
    """Laplace transform of amp*cos(omega t + phase)."""
    if omega == 0:
        return RationalS([0.0, amp * math.cos(phase)], [0.0, 0.0, 1.0])
    return RationalS(
        [-amp * omega * math.sin(phase), amp * math.cos(phase)],
        [omega * omega, 0.0, 1.0],
    )


def square_transform(amps, omegas, phases) -> RationalSum:
    """Laplace transform of (sum_m a_m cos(w_m t + p_m))**2, grouped by frequency."""
    groups = {}
    n = len(amps)
    for i in range(n):
        for j in range(n):
            w = amps[i] * amps[j] / 2.0
            if w == 0:
                continue
            for om, ph in ((omegas[i] - omegas[j], phases[i] - phases[j]),
                           (omegas[i] + omegas[j], phases[i] + phases[j])):
                # cos is even: fold negative frequencies onto positive ones
                if om < 0:
                    om, ph = -om, -ph
                key = round(om, 3)
                c, sn = groups.get(key, (0.0, 0.0))
                groups[key] = (c + w * math.cos(ph), sn + w * math.sin(ph))
    terms = []
    for om in sorted(groups):
        c, sn = groups[om]
        if om == 0:
            terms.append(RationalS([c], [0.0, 1.0]))
        else:
            terms.append(RationalS([-om * sn, c], [om * om, 0.0, 1.0]))
    return RationalSum(terms)


def associated_terms(ctx: KernelContext):
    """(g12, a_term, b_term) in the reference association-of-variables form.

    ``b_term`` is prefactor * (s/2) sum_i sum_j a_i a_j [...] with the
    Thevenin tone amplitudes as a_i; it is returned as a RationalSum whose
    ``combine()`` gives the single common-denominator RationalS.
    """
    pre = _prefactor(ctx)
    amps = [t.amplitude for t in ctx.tones.tones]
    omegas = [2 * math.pi * t.freq for t in ctx.tones.tones]
    sq = square_transform(amps, omegas, [0.0] * len(amps))
    return pre, pre, sq * pre


def _vi_transform(tones: ToneSet) -> RationalSum:
    return RationalSum(
        _cos_transform(t.amplitude, 2 * math.pi * t.freq, t.phase) for t in tones.tones
    )


def f_terms(ctx: KernelContext):
    """Reference F1, F2, F3, verbatim including their sign conventions."""
    c1, c2 = ctx.circuit.c1, ctx.circuit.c2
    r_s, r_l = ctx.diode.r_s, ctx.circuit.r_l
    s = RationalS.s()
    h = 1 / RationalS([ctx.g1, ctx.diode.c_j0])
    out_rc = RationalS([1.0, c2 * r_l])  # C2 R_L s + 1
    in_rc = RationalS([1.0, c1 * r_s])   # C1 R_s s + 1
    c1s = RationalS([0.0, c1])
    f1 = out_rc / c1s - (in_rc / c1s + h) * (
        (-c1s) * (r_s * out_rc * (h + 1) + r_l) - out_rc
    )
    f2 = c1s * h + c1 * r_s * s + 2
    f3 = (-c1s * r_s * out_rc) * h + r_s * in_rc * out_rc
    return f1, f2, f3


# --------------------------------------------------------------------------
# derived nodal formulation

_NODES = ("in", "x", "d1", "d2", "out")


@dataclass
class NetworkTerms:
    """Polynomial pieces of I_L(s) = (F2 V_i + F3_1 B_1 + F3_2 B_2 + A)/F1."""

    f1: RationalS
    f2: RationalS
    f3: tuple
    junction_tf: tuple  # V_jk(s) / V_i(s)
    det: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "F1": self.f1.to_dict(),
            "F2": self.f2.to_dict(),
            "F3_d1": self.f3[0].to_dict(),
            "F3_d2": self.f3[1].to_dict(),
        }


def network_terms(ctx: KernelContext) -> NetworkTerms:
    """Nodal admittance solution of the linearised doubler.

    Junctions are linearised to g1 + C0 s; capacitors C1, C2 are exact.
    The Thevenin source drives node ``in`` through z_source as a Norton
    current V_i/z_source.
    """
    c = ctx.circuit
    d = ctx.diode
    idx = {n: k for k, n in enumerate(_NODES)}
    n = len(_NODES)
    y = [[np.zeros(1) for _ in range(n)] for _ in range(n)]

    def stamp(a, b, poly):
        poly = np.asarray(poly, dtype=float)
        ia = idx.get(a)
        ib = idx.get(b)
        for i, sgn_i in ((ia, 1), (ib, -1)):
            if i is None:
                continue
            for j, sgn_j in ((ia, 1), (ib, -1)):
                if j is None:
                    continue
                y[i][j] = np.polynomial.polynomial.polyadd(y[i][j], sgn_i * sgn_j * poly)

    r_s = max(d.r_s, 1e-6)
    stamp("in", "gnd", [1.0 / c.z_source])
    stamp("in", "x", [0.0, c.c1])
    stamp("gnd", "d1", [1.0 / r_s])
    stamp("x", "d2", [1.0 / r_s])
    stamp("d1", "x", [ctx.g1, d.c_j0])
    stamp("d2", "out", [ctx.g1, d.c_j0])
    stamp("out", "gnd", [1.0 / c.r_l, c.c2])

    det = poly_det(y)
    # adj[j][i] = cofactor(i, j); V = adj J / det
    def adj(row, col):
        return poly_cofactor(y, col, row)

    o = idx["out"]
    f1 = RationalS(c.r_l * det)
    f2 = RationalS(adj(o, idx["in"]) / c.z_source)
    junctions = (("d1", "x"), ("d2", "out"))
    f3 = []
    jtf = []
    for a, k in junctions:
        # nonlinear current leaves the anode and enters the cathode
        f3.append(RationalS(np.polynomial.polynomial.polysub(adj(o, idx[k]), adj(o, idx[a]))))
        vin = np.polynomial.polynomial.polysub(adj(idx[a], idx["in"]), adj(idx[k], idx["in"]))
        jtf.append(RationalS(vin / c.z_source, det))
    return NetworkTerms(f1=f1, f2=f2, f3=tuple(f3), junction_tf=tuple(jtf), det=det)


@dataclass
class ClosedFormDC:
    i_dc: float
    v_dc: float
    form: str
    i_offset: float = 0.0
    audit: dict = field(default_factory=dict)


def junction_spectra(ctx: KernelContext, terms: Optional[NetworkTerms] = None):
    """First-order junction voltage amplitude/phase per tone, per junction."""
    terms = terms or network_terms(ctx)
    out = []
    for tf in terms.junction_tf:
        amps, phases = [], []
        for t in ctx.tones.tones:
            v = tf(2j * math.pi * t.freq) * t.amplitude * complex(math.cos(t.phase), math.sin(t.phase))
            amps.append(abs(v))
            phases.append(math.atan2(v.imag, v.real))
        out.append((amps, phases))
    return out


def second_order_sources(ctx: KernelContext, terms: Optional[NetworkTerms] = None):
    """B_1, B_2: transforms of g2 v_k^2 + (C0/4V0) d(v_k^2)/dt."""
    terms = terms or network_terms(ctx)
    d = ctx.diode
    g2 = d.i_s * ctx.alpha**2 / 2.0
    cq = d.c_j0 / (4.0 * d.v_j)
    omegas = [2 * math.pi * t.freq for t in ctx.tones.tones]
    out = []
    for amps, phases in junction_spectra(ctx, terms):
        sq = square_transform(amps, omegas, phases)
        out.append(sq * RationalS([g2, cq]))
    return tuple(out)


def load_current_transform(ctx: KernelContext, bias_offset: bool = False):
    """I_L(s) as a RationalSum plus its pieces (used by the limit and audits)."""
    terms = network_terms(ctx)
    vi = _vi_transform(ctx.tones)
    b1, b2 = second_order_sources(ctx, terms)
    inv_f1 = 1 / terms.f1
    il = vi * (terms.f2 * inv_f1) + b1 * (terms.f3[0] * inv_f1) + b2 * (terms.f3[1] * inv_f1)
    a = RationalS.const(0.0)
    if bias_offset:
        # constant i_s of the uncorrected exp series, a step source in each junction
        a = RationalS([ctx.diode.i_s], [0.0, 1.0]) * (terms.f3[0] + terms.f3[1])
        il = il + RationalSum([a * inv_f1])
    return il, {"terms": terms, "V_i": vi, "B": (b1, b2), "A": a}


def dc_closed_form(ctx: KernelContext, form: str = "derived", bias_offset: bool = False) -> ClosedFormDC:
    """DC load current and voltage: i_dc = lim_{s->0} s I_L(s), v_dc = R_L i_dc.

    ``form="derived"`` uses the doubler's nodal F-terms; ``form="reference"``
    assembles the reference F1/F2/F3/A/B terms instead (audit only: their
    F1 has a pole at s = 0, so the limit is identically zero).
    ``bias_offset`` keeps the constant i_s term of the exponential series
    written without its -1.
    """
    if form == "reference":
        return _dc_reference(ctx)
    if form != "derived":
        raise ValueError(f"unknown form {form!r}")
    terms = network_terms(ctx)
    if terms.f1.order_at_zero() >= 1:
        raise NumericalError("F1 vanishes at s = 0: ill-posed DC limit")
    il, parts = load_current_transform(ctx, bias_offset=bias_offset)
    i_dc = il.mul_s(1).value_at_zero()
    i_off = 0.0
    if bias_offset:
        i_off = (parts["A"] / terms.f1).mul_s(1).value_at_zero()
    b1, b2 = parts["B"]
    audit = {
        "form": "derived",
        "bias_offset": bias_offset,
        **terms.to_dict(),
        "A": parts["A"].to_dict(),
        "B_d1": b1.to_list(),
        "B_d2": b2.to_list(),
    }
    return ClosedFormDC(i_dc=i_dc, v_dc=ctx.circuit.r_l * i_dc, form="derived", i_offset=i_off, audit=audit)


def _dc_reference(ctx: KernelContext) -> ClosedFormDC:
    f1, f2, f3 = f_terms(ctx)
    _, a_term, b_term = associated_terms(ctx)
    k = f1.order_at_zero()
    if k >= 2:
        raise NumericalError(f"reference F1 has a zero of order {k} at s = 0; DC limit ill-posed")
    vi = _vi_transform(ctx.tones)
    inv_f1 = 1 / f1
    il = vi * (f2 * inv_f1) + b_term * (f3 * inv_f1) + RationalSum([a_term * inv_f1])
    i_dc = il.mul_s(1).value_at_zero()
    audit = {
        "form": "reference",
        "F1": f1.to_dict(),
        "F2": f2.to_dict(),
        "F3": f3.to_dict(),
        "A": a_term.to_dict(),
        "B": b_term.to_list(),
    }
    return ClosedFormDC(i_dc=i_dc, v_dc=ctx.circuit.r_l * i_dc, form="reference", audit=audit)


def grouped_transform(ctx: KernelContext, bias_offset: bool = False) -> RationalSum:
    """The grouped form C1 s^2 (F2 V_i + F3 B + A) / (C1 s F1)."""
    il, _ = load_current_transform(ctx, bias_offset=bias_offset)
    c1 = ctx.circuit.c1
    # multiply numerator by C1 s^2 and denominator by C1 s, term by term
    return RationalSum(
        RationalS(np.polynomial.polynomial.polymul(t.num, [0.0, 0.0, c1]),
                  np.polynomial.polynomial.polymul(t.den, [0.0, c1]))
        for t in il.terms
    )


def limit_probe_point(ctx: KernelContext, factor: float = 1e-4) -> float:
    """Real s at which s I_L(s) numerically approximates its s -> 0 limit.

    The probe sits ``factor`` below both the lowest tone frequency and the
    slowest natural frequency of the network (smallest root of F1); the
    latter is far below the tones when C2 R_L is large.
    """
    omegas = [2 * math.pi * t.freq for t in ctx.tones.tones]
    roots = np.polynomial.polynomial.polyroots(network_terms(ctx).f1.num)
    scales = omegas + [abs(r) for r in roots if abs(r) > 0]
    return factor * min(scales)
