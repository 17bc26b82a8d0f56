"""Rational functions of the Laplace variable with real coefficients.

Coefficient lists are ascending in powers of ``s``. Factors of ``s`` are
tracked on the coefficients themselves: a structurally zero low-order
coefficient is an exact 0.0, so common ``s**k`` factors can be cancelled
without any floating-point limit.
"""
from __future__ import annotations

import math
from typing import Iterable, List, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import NumericalError


def _as_poly(c) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(c, dtype=float)).copy()
    if arr.size == 0:
        arr = np.zeros(1)
    # drop exact-zero high-order coefficients
    nz = np.flatnonzero(arr)
    if nz.size == 0:
        return np.zeros(1)
    return arr[: nz[-1] + 1]


def low_order(c: np.ndarray) -> int:
    """Power of the lowest nonzero coefficient (multiplicity of s=0)."""
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return math.inf
    return int(nz[0])


def horner(c: np.ndarray, s: complex) -> complex:
    acc = 0j
    for a in c[::-1]:
        acc = acc * s + a
    return acc


class RationalS:
    """num(s) / den(s) with exact s-power cancellation."""

    __slots__ = ("num", "den")

    def __init__(self, num: Sequence[float], den: Sequence[float] = (1.0,)):
        num = _as_poly(num)
        den = _as_poly(den)
        if not np.any(den):
            raise NumericalError("denominator is identically zero")
        if not np.any(num):
            self.num = np.zeros(1)
            self.den = np.ones(1)
            return
        k = min(low_order(num), low_order(den))
        if k:
            num = num[k:]
            den = den[k:]
        lead = den[low_order(den)]
        self.num = num / lead
        self.den = den / lead

    # construction helpers
    @classmethod
    def const(cls, c: float) -> "RationalS":
        return cls([c])

    @classmethod
    def s(cls) -> "RationalS":
        return cls([0.0, 1.0])

    @classmethod
    def coerce(cls, x) -> "RationalS":
        if isinstance(x, RationalS):
            return x
        return cls.const(float(x))

    # algebra
    def __add__(self, other):
        o = RationalS.coerce(other)
        if np.array_equal(self.den, o.den):
            return RationalS(P.polyadd(self.num, o.num), self.den)
        return RationalS(
            P.polyadd(P.polymul(self.num, o.den), P.polymul(o.num, self.den)),
            P.polymul(self.den, o.den),
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalS(-self.num, self.den)

    def __sub__(self, other):
        return self + (-RationalS.coerce(other))

    def __rsub__(self, other):
        return RationalS.coerce(other) - self

    def __mul__(self, other):
        o = RationalS.coerce(other)
        return RationalS(P.polymul(self.num, o.num), P.polymul(self.den, o.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = RationalS.coerce(other)
        if not np.any(o.num):
            raise NumericalError("division by the zero rational function")
        return RationalS(P.polymul(self.num, o.den), P.polymul(self.den, o.num))

    def __rtruediv__(self, other):
        return RationalS.coerce(other) / self

    def mul_s(self, k: int = 1) -> "RationalS":
        """Multiply by s**k (k may be negative) exactly."""
        if k >= 0:
            return RationalS(np.concatenate([np.zeros(k), self.num]), self.den)
        return RationalS(self.num, np.concatenate([np.zeros(-k), self.den]))

    # evaluation
    def __call__(self, s: complex) -> complex:
        d = horner(self.den, s)
        if d == 0:
            raise NumericalError(f"pole at s = {s!r}")
        return horner(self.num, s) / d

    @property
    def degrees(self):
        return (len(self.num) - 1, len(self.den) - 1)

    def is_zero(self) -> bool:
        return not np.any(self.num)

    def order_at_zero(self) -> int:
        """Zero (positive) or pole (negative) order at s = 0."""
        if self.is_zero():
            return math.inf
        return low_order(self.num) - low_order(self.den)

    def value_at_zero(self) -> float:
        """Limit as s -> 0; raises if s = 0 is a pole."""
        k = self.order_at_zero()
        if k == math.inf or k > 0:
            return 0.0
        if k < 0:
            raise NumericalError(f"pole of order {-k} at s = 0")
        return float(self.num[low_order(self.num)] / self.den[low_order(self.den)])

    def reduced(self, rtol: float = 1e-8) -> "RationalS":
        """Cancel numerator/denominator roots that coincide within ``rtol``.

        Used for degree bookkeeping only: root matching is numerical, so the
        exact s -> 0 limit never goes through here.
        """
        if self.is_zero():
            return self
        num = np.trim_zeros(self.num, "b")
        den = np.trim_zeros(self.den, "b")
        zn = list(np.polynomial.polynomial.polyroots(num)) if len(num) > 1 else []
        zd = list(np.polynomial.polynomial.polyroots(den)) if len(den) > 1 else []
        keep_n = []
        for r in zn:
            hit = next((k for k, q in enumerate(zd) if abs(r - q) <= rtol * max(1.0, abs(r))), None)
            if hit is None:
                keep_n.append(r)
            else:
                zd.pop(hit)
        pn = num[-1] * np.polynomial.polynomial.polyfromroots(keep_n) if keep_n else np.array([num[-1]])
        pd = den[-1] * np.polynomial.polynomial.polyfromroots(zd) if zd else np.array([den[-1]])
        return RationalS(np.real_if_close(pn, tol=1e6).real, np.real_if_close(pd, tol=1e6).real)

    def to_dict(self) -> dict:
        return {"num": [float(c) for c in self.num], "den": [float(c) for c in self.den]}

    def __repr__(self):
        return f"RationalS(num={self.num.tolist()}, den={self.den.tolist()})"


class RationalSum:
    """Unreduced sum of RationalS terms.

    Large tone sets produce hundreds of distinct quadratic denominators whose
    product would overflow double precision; keeping the partial fractions
    separate keeps every operation exact term by term.
    """

    def __init__(self, terms: Iterable[RationalS] = ()):
        self.terms: List[RationalS] = [t for t in terms if not t.is_zero()]

    def __mul__(self, other):
        o = RationalS.coerce(other)
        return RationalSum(t * o for t in self.terms)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, RationalSum):
            return RationalSum(self.terms + other.terms)
        return RationalSum(self.terms + [RationalS.coerce(other)])

    def mul_s(self, k: int = 1) -> "RationalSum":
        return RationalSum(t.mul_s(k) for t in self.terms)

    def __call__(self, s: complex) -> complex:
        return sum((t(s) for t in self.terms), 0j)

    def value_at_zero(self) -> float:
        return float(sum(t.value_at_zero() for t in self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def combine(self) -> RationalS:
        """Collapse to one RationalS over the common denominator."""
        out = RationalS.const(0.0)
        for t in self.terms:
            out = out + t
        if not (np.all(np.isfinite(out.num)) and np.all(np.isfinite(out.den))):
            raise NumericalError("common denominator overflows double precision")
        return out

    def to_list(self) -> list:
        return [t.to_dict() for t in self.terms]


def poly_det(m: List[List[np.ndarray]]) -> np.ndarray:
    """Determinant of a square matrix of polynomials by cofactor expansion.

    Division-free, so structurally exact for the small (<= 6x6) admittance
    matrices used here.
    """
    n = len(m)
    return _det(tuple(range(n)), tuple(range(n)), m, {})


def _det(rows, cols, m, memo):
    key = (rows, cols)
    if key in memo:
        return memo[key]
    if len(rows) == 1:
        out = _as_poly(m[rows[0]][cols[0]])
    else:
        r0 = rows[0]
        rest = rows[1:]
        out = np.zeros(1)
        for j, c in enumerate(cols):
            entry = m[r0][c]
            if not np.any(entry):
                continue
            minor = _det(rest, cols[:j] + cols[j + 1:], m, memo)
            term = P.polymul(entry, minor)
            out = P.polysub(out, term) if j % 2 else P.polyadd(out, term)
        out = _as_poly(out)
    memo[key] = out
    return out


def poly_cofactor(m, i: int, j: int) -> np.ndarray:
    """(i, j) cofactor: signed determinant with row i and column j removed."""
    n = len(m)
    rows = tuple(r for r in range(n) if r != i)
    cols = tuple(c for c in range(n) if c != j)
    d = _det(rows, cols, m, {})
    return -d if (i + j) % 2 else d
