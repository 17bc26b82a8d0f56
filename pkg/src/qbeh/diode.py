"""Schottky junction model (HSMS2850 defaults) and its Taylor coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ContractError, NumericalError, UsageError

BOLTZMANN = 1.380649e-23
ELECTRON_CHARGE = 1.602177e-19

OVERFLOW_GUARD = 200.0
CAP_GUARD = 0.02


@dataclass(frozen=True)
class DiodeParams:
    i_s: float = 3e-6
    n: float = 1.06
    r_s: float = 25.0
    c_j0: float = 0.18e-12
    v_j: float = 0.35
    b_v: float = 3.8
    i_bv: float = 3e-4
    e_g: float = 0.69  # carried for completeness, unused by the models
    temperature: float = 300.0

    def __post_init__(self):
        checks = {
            "i_s": self.i_s > 0,
            "n": self.n >= 1,
            "r_s": self.r_s >= 0,
            "c_j0": self.c_j0 > 0,
            "v_j": self.v_j > 0,
            "b_v": self.b_v > 0,
            "i_bv": self.i_bv > 0,
            "temperature": self.temperature > 0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ContractError(f"invalid diode parameters: {', '.join(bad)}")


HSMS2850 = DiodeParams()


@dataclass(frozen=True)
class TaylorModel:
    alpha: float
    g_coeffs: list = field(default_factory=list)
    c_coeffs: list = field(default_factory=list)
    order: int = 1

    def current(self, v: float) -> float:
        """Conductive series at ``v``; note the series has no -1 term."""
        return sum(c * v**k for k, c in enumerate(self.g_coeffs))

    def capacitance(self, v: float) -> float:
        return sum(c * v**k for k, c in enumerate(self.c_coeffs))


def alpha(p: DiodeParams) -> float:
    """Inverse of n*kT/q, in 1/V."""
    return ELECTRON_CHARGE / (p.n * BOLTZMANN * p.temperature)


def junction_current(v: float, p: DiodeParams) -> float:
    """Exact junction law with a soft reverse-breakdown exponential."""
    a = alpha(p)
    if a * v > OVERFLOW_GUARD:
        raise NumericalError(f"junction voltage {v!r} V overflows exp (alpha*v > {OVERFLOW_GUARD})")
    i = p.i_s * math.expm1(a * v)
    if v < -p.b_v:
        arg = -a * (v + p.b_v)
        if arg > OVERFLOW_GUARD:
            raise NumericalError(f"junction voltage {v!r} V overflows the breakdown branch")
        # -1 keeps the law continuous at v = -b_v
        i -= p.i_bv * math.expm1(arg)
    return i


def junction_capacitance(v: float, p: DiodeParams) -> float:
    if v >= p.v_j * (1 - CAP_GUARD):
        raise NumericalError(
            f"junction capacitance singular near v_j: v = {v!r} V, v_j = {p.v_j!r} V"
        )
    return p.c_j0 / math.sqrt(1 - v / p.v_j)


def taylor_model(p: DiodeParams, order: int) -> TaylorModel:
    """Power-series coefficients of i_s*exp(alpha v) and C(v) up to ``order``.

    Capacitance coefficients are the binomial series of (1 - v/v_j)^(-1/2):
    c_j0 * (2k)! / (4^k (k!)^2) / v_j^k.
    """
    if not isinstance(order, int) or not 1 <= order <= 6:
        raise UsageError(f"order must be an integer in [1, 6], got {order!r}")
    a = alpha(p)
    g = [p.i_s * a**k / math.factorial(k) for k in range(order + 1)]
    c = [
        p.c_j0 * math.comb(2 * k, k) / 4**k / p.v_j**k
        for k in range(order + 1)
    ]
    return TaylorModel(alpha=a, g_coeffs=g, c_coeffs=c, order=order)
