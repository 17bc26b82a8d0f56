"""Extended CRLH unit cell: immittances, resonances, dispersion, chain matrix.

The series arm is a series L_R^c/C_L^c resonator in series with a parallel
L_R^d/C_L^d tank; the shunt arm is a parallel L_L^c/C_R^c tank in parallel
with a series L_L^d/C_R^d resonator. The cell is realised as a symmetric T
(Z/2, Y, Z/2) so that its ``a`` entry is exactly ``1 + Z*Y/2``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, fields

from .errors import ContractError, PoleProximityError
from .netcore import AbcdMatrix, cascade, series, shunt

POLE_GUARD = 1e-9

NH = 1e-9
PF = 1e-12


@dataclass(frozen=True)
class ECRLHParams:
    """Eight lumped elements in SI units (henries, farads)."""

    l_r_c: float
    c_l_c: float
    l_l_c: float
    c_r_c: float
    l_r_d: float
    c_l_d: float
    l_l_d: float
    c_r_d: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ContractError(f"{f.name} must be positive and finite, got {v!r}")
            object.__setattr__(self, f.name, float(v))

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def as_vector(self):
        return [getattr(self, n) for n in self.names()]

    @classmethod
    def from_vector(cls, values):
        return cls(*[float(v) for v in values])

    @classmethod
    def is_inductor(cls, name: str) -> bool:
        return name.startswith("l_")

    def to_file_units(self) -> dict:
        """nH / pF keyed dict as used in config and result files."""
        out = {}
        for n in self.names():
            v = getattr(self, n)
            if self.is_inductor(n):
                out[f"{n}_nh"] = v / NH
            else:
                out[f"{n}_pf"] = v / PF
        return out

    @classmethod
    def from_file_units(cls, d: dict) -> "ECRLHParams":
        vals = []
        for n in cls.names():
            key = f"{n}_nh" if cls.is_inductor(n) else f"{n}_pf"
            vals.append(d[key] * (NH if cls.is_inductor(n) else PF))
        return cls(*vals)


# Reference quad-band cell; the symbol mapping is documented in the README.
REFERENCE_CELL = ECRLHParams(
    l_r_c=9.6 * NH,
    c_l_c=0.2 * PF,
    l_l_c=49.4 * NH,
    c_r_c=0.04 * PF,
    l_r_d=11.0 * NH,
    c_l_d=0.48 * PF,
    l_l_d=120.7 * NH,
    c_r_d=0.04 * PF,
)


@dataclass(frozen=True)
class ResonanceSet:
    w_cs: float
    w_cp: float
    w_dp: float
    w_ds: float

    def as_hz(self) -> dict:
        return {k: getattr(self, k) / (2 * math.pi) for k in ("w_cs", "w_cp", "w_dp", "w_ds")}


@dataclass(frozen=True)
class DispersionPoint:
    beta_p: complex
    z_c: complex


def resonances(p: ECRLHParams) -> ResonanceSet:
    return ResonanceSet(
        w_cs=1.0 / math.sqrt(p.l_r_c * p.c_l_c),
        w_cp=1.0 / math.sqrt(p.l_l_c * p.c_r_c),
        w_dp=1.0 / math.sqrt(p.l_r_d * p.c_l_d),
        w_ds=1.0 / math.sqrt(p.l_l_d * p.c_r_d),
    )


def _check_frequency(f):
    if not (math.isfinite(f) and f > 0):
        raise ContractError(f"frequency must be positive, got {f!r}")


def immittances(p: ECRLHParams, f: float):
    """Series impedance Z and shunt admittance Y of the cell at ``f`` Hz.

    Both are purely imaginary. Raises PoleProximityError within a relative
    guard band of the tank resonances (Z pole at w_dp, Y pole at w_ds).
    """
    _check_frequency(f)
    w = 2 * math.pi * f
    r = resonances(p)
    if abs(w - r.w_dp) <= POLE_GUARD * r.w_dp:
        raise PoleProximityError(f"f = {f!r} Hz is at the series-arm tank pole w_dp", "w_dp")
    if abs(w - r.w_ds) <= POLE_GUARD * r.w_ds:
        raise PoleProximityError(f"f = {f!r} Hz is at the shunt-arm pole w_ds", "w_ds")
    x = w * p.l_r_c * (1 - (r.w_cs / w) ** 2) - 1.0 / (w * p.c_l_d * (1 - (r.w_dp / w) ** 2))
    b = w * p.c_r_c * (1 - (r.w_cp / w) ** 2) - 1.0 / (w * p.l_l_d * (1 - (r.w_ds / w) ** 2))
    return complex(0.0, x), complex(0.0, b)


def _acos_passive(x: complex) -> complex:
    w = cmath.acos(x)
    if w.imag > 0:
        flipped = complex(w.real, -w.imag)
        if abs(cmath.cos(flipped) - x) <= 1e-12 * max(1.0, abs(x)):
            w = flipped
    return w


def dispersion(p: ECRLHParams, f: float) -> DispersionPoint:
    z, y = immittances(p, f)
    return dispersion_from_immittances(z, y)


def dispersion_from_immittances(z: complex, y: complex) -> DispersionPoint:
    beta_p = _acos_passive(1 + z * y / 2)
    if y == 0:
        zc = complex(math.inf, 0.0)
    else:
        zc = cmath.sqrt(z / y)
        if zc.real < 0:
            zc = -zc
    return DispersionPoint(beta_p=beta_p, z_c=zc)


def t_cell(z: complex, y: complex) -> AbcdMatrix:
    return cascade([series(z / 2), shunt(y), series(z / 2)])


def cell_abcd(p: ECRLHParams, f: float) -> AbcdMatrix:
    z, y = immittances(p, f)
    return t_cell(z, y)
