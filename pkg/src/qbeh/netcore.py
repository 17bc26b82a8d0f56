"""Two-port ABCD algebra, termination and reflection.

Everything here is a pure function of immutable values. Matrices are the
usual transmission (chain) matrices with ``b`` in ohms and ``c`` in
siemens, so cascading is a left-to-right matrix product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import Sequence

from .errors import ContractError, NumericalError, UsageError

S11_FLOOR_DB = -200.0


class ImmittanceKind(str, Enum):
    IMPEDANCE = "impedance"
    ADMITTANCE = "admittance"


@dataclass(frozen=True)
class ComplexImmittance:
    value: complex
    kind: ImmittanceKind = ImmittanceKind.IMPEDANCE

    def __post_init__(self):
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ContractError(f"immittance must be finite, got {v!r}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "kind", ImmittanceKind(self.kind))

    @classmethod
    def impedance(cls, z):
        return cls(z, ImmittanceKind.IMPEDANCE)

    @classmethod
    def admittance(cls, y):
        return cls(y, ImmittanceKind.ADMITTANCE)


@dataclass(frozen=True)
class AbcdMatrix:
    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def identity(cls) -> "AbcdMatrix":
        return cls(1 + 0j, 0j, 0j, 1 + 0j)

    def __matmul__(self, other: "AbcdMatrix") -> "AbcdMatrix":
        return AbcdMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @property
    def determinant(self) -> complex:
        return self.a * self.d - self.b * self.c

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True)
class ReflectionReport:
    z_in: complex
    gamma: complex
    s11_db: float


def abcd_elementary(kind: str, value: ComplexImmittance) -> AbcdMatrix:
    """Series impedance or shunt admittance as a chain matrix.

    A series element must be given as an impedance and a shunt element as
    an admittance; mixing them up is a contract violation rather than a
    silent conversion.
    """
    if not isinstance(value, ComplexImmittance):
        raise ContractError("value must be a ComplexImmittance")
    if kind == "series":
        if value.kind is not ImmittanceKind.IMPEDANCE:
            raise ContractError("series element takes an impedance")
        return AbcdMatrix(1 + 0j, value.value, 0j, 1 + 0j)
    if kind == "shunt":
        if value.kind is not ImmittanceKind.ADMITTANCE:
            raise ContractError("shunt element takes an admittance")
        return AbcdMatrix(1 + 0j, 0j, value.value, 1 + 0j)
    raise ContractError(f"kind must be 'series' or 'shunt', got {kind!r}")


def series(z: complex) -> AbcdMatrix:
    return abcd_elementary("series", ComplexImmittance.impedance(z))


def shunt(y: complex) -> AbcdMatrix:
    return abcd_elementary("shunt", ComplexImmittance.admittance(y))


def cascade(ms: Sequence[AbcdMatrix]) -> AbcdMatrix:
    ms = list(ms)
    if not ms:
        raise UsageError("cascade needs at least one matrix")
    return reduce(lambda x, y: x @ y, ms)


def terminate(m: AbcdMatrix, z_load: complex) -> complex:
    """Input impedance of ``m`` loaded by ``z_load``."""
    den = m.c * z_load + m.d
    num = m.a * z_load + m.b
    scale = max(abs(m.c * z_load), abs(m.d), 1e-300)
    if den == 0 or abs(den) <= 1e-14 * scale:
        raise NumericalError(
            f"singular termination: c*z_load + d = {den!r} "
            f"(a={m.a!r}, b={m.b!r}, c={m.c!r}, d={m.d!r}, z_load={z_load!r})"
        )
    return num / den


def reflection(z_in: complex, z0: float) -> ReflectionReport:
    if not z0 > 0:
        raise ContractError(f"reference impedance must be positive, got {z0!r}")
    z_in = complex(z_in)
    den = z_in + z0
    if den == 0:
        raise NumericalError(f"z_in = -z0 = {z_in!r} makes the reflection coefficient infinite")
    gamma = (z_in - z0) / den
    mag = abs(gamma)
    if mag <= 10 ** (S11_FLOOR_DB / 20):
        s11 = S11_FLOOR_DB
    else:
        s11 = 20.0 * math.log10(mag)
    return ReflectionReport(z_in=z_in, gamma=gamma, s11_db=s11)


def inverse_terminate(m: AbcdMatrix, z_in: complex) -> complex:
    """Load that makes ``terminate(m, z_load) == z_in``."""
    # (a zl + b) = z_in (c zl + d)  ->  zl (a - z_in c) = z_in d - b
    den = m.a - z_in * m.c
    if den == 0:
        raise NumericalError("no finite load produces the requested input impedance")
    return (z_in * m.d - m.b) / den


def s11_to_db(gamma: complex) -> float:
    mag = abs(gamma)
    if mag <= 10 ** (S11_FLOOR_DB / 20):
        return S11_FLOOR_DB
    return 20.0 * math.log10(mag)

