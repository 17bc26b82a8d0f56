"""Quad-band matching synthesis for the E-CRLH cell.

A cell with immittances (Z, Y) transforms ``z_load`` into ``z_in`` exactly
when ``Y == Y_req`` with

    Y_req = cos(theta) (z_load - z_in) / (z_load z_in - z_c^2 (1 + cos theta)/2)

The matching condition used for synthesis is the squared form
``Y_req**2 - Y**2 == 0`` (written in terms of theta and z_c), which also
admits the mirrored solution ``Y_req == -Y``. Solutions are therefore
screened with a forward termination check before one is accepted.
"""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import io as qio
from .ecrlh import NH, PF, ECRLHParams, cell_abcd, dispersion, immittances
from .errors import ContractError, NumericalError, PoleProximityError, SynthesisError
from .netcore import reflection, s11_to_db, terminate

DEFAULT_L_BOUNDS = (0.1 * NH, 200 * NH)
DEFAULT_C_BOUNDS = (0.01 * PF, 10 * PF)
SUCCESS_RESIDUAL = 1e-8
FAILURE_RESIDUAL = 1e-4
FORWARD_RTOL = 1e-6
# residual assigned to points that land on an immittance pole
_POLE_PENALTY = 1e6


def _eq8_from_cos(cos_t: complex, zc2: complex, z_load: complex, z_in: complex) -> complex:
    den = z_load * z_in - zc2 * (1 + cos_t) / 2
    if den == 0 or zc2 == 0:
        raise NumericalError("degenerate configuration: singular matching denominator")
    y_req = cos_t * (z_load - z_in) / den
    return y_req * y_req + 2 * (1 - cos_t) / zc2


def eq8_residual(theta: complex, z_c: complex, z_load: complex, z_in: complex) -> complex:
    """Matching-condition residual; zero when the cell maps z_load to z_in."""
    if z_c == 0:
        raise NumericalError("degenerate configuration: z_c = 0")
    return _eq8_from_cos(cmath.cos(theta), z_c * z_c, z_load, z_in)


def matching_cubic(z_c: complex, z_load: complex, z_in: complex) -> np.ndarray:
    """Ascending coefficients of z_c^2 N(u)^2 + 2 (1 - u) D(u)^2 in u = cos(theta).

    N = (z_load - z_in) u and D = z_load z_in - z_c^2 (1 + u)/2; this is the
    matching condition with its denominator cleared.
    """
    zc2 = complex(z_c) ** 2
    P = np.polynomial.polynomial
    n = np.array([0, z_load - z_in], dtype=complex)
    d = np.array([z_load * z_in - zc2 / 2, -zc2 / 2], dtype=complex)
    return P.polyadd(zc2 * P.polymul(n, n), 2 * P.polymul([1, -1], P.polymul(d, d)))


def theta_roots(z_c: complex, z_load: complex, z_in: complex) -> list:
    """All cos(theta) roots of the matching condition for a given z_c.

    The cleared condition is a cubic (see ``matching_cubic``). Roots where D
    vanishes were introduced by the clearing and are dropped. When N also
    vanishes there (z_load == z_in, or D's root at u = 0) the spurious
    factor is a double root, so it is divided out exactly instead of being
    left to a root finder that would split it by sqrt(eps). The remaining
    roots are Newton-polished on the cubic.
    """
    if z_c == 0:
        raise NumericalError("degenerate configuration: z_c = 0")
    zc2 = complex(z_c) ** 2
    P = np.polynomial.polynomial
    d = np.array([z_load * z_in - zc2 / 2, -zc2 / 2], dtype=complex)
    u_d = 2 * z_load * z_in / zc2 - 1
    poly = np.trim_zeros(matching_cubic(z_c, z_load, z_in), "b")
    if len(poly) < 2:
        return []
    if z_load == z_in:
        # identity cell; u = 1 survives unless it is D's root as well
        return [] if u_d == 1 else [1 + 0j]
    search = poly
    if u_d == 0:
        search, _ = P.polydiv(poly, P.polymul([-u_d, 1], [-u_d, 1]))
    dpoly = P.polyder(poly)
    scale = abs(z_load * z_in) + abs(zc2)
    out = []
    for u in np.roots(np.trim_zeros(search, "b")[::-1]):
        for _ in range(3):
            du = P.polyval(u, dpoly)
            if du == 0:
                break
            u = u - P.polyval(u, poly) / du
        if abs(P.polyval(u, d)) <= 1e-7 * scale:
            continue
        out.append(complex(u))
    return out


def solve_theta(z_c: complex, z_load: complex, z_in: complex, choice: Optional[int] = None) -> complex:
    """Pick a theta root: by index, else the one with smallest |Im theta| and Re theta in (0, pi)."""
    # principal branch: Re theta in [0, pi]; conjugating would change cos(theta)
    thetas = [cmath.acos(u) for u in theta_roots(z_c, z_load, z_in)]
    if not thetas:
        raise NumericalError("matching condition has no roots for this configuration")
    if choice is not None:
        return sorted(thetas, key=lambda t: (t.real, t.imag))[choice]
    inside = [t for t in thetas if 0 < t.real < math.pi]
    pool = inside or thetas
    return min(pool, key=lambda t: (abs(t.imag), t.real))


def realize(theta: complex, z_c: complex, z_load: complex, z_in: complex):
    """(Z, Y) with cos(theta) = 1 + ZY/2 and Z/Y = z_c^2, on the matching sign branch."""
    cos_t = cmath.cos(theta)
    zc2 = complex(z_c) ** 2
    y = cmath.sqrt(2 * (cos_t - 1) / zc2)
    den = z_load * z_in - zc2 * (1 + cos_t) / 2
    y_req = cos_t * (z_load - z_in) / den
    if abs(y_req + y) < abs(y_req - y):
        y = -y
    return zc2 * y, y


def band_reactances(z_load: complex, z_in: complex) -> list:
    """Lossless (X, B) pairs for which the T-cell (jX/2, jB, jX/2) maps z_load to z_in.

    With w = jx the half-arm, jB = 1/(z_in - w) - 1/(w + z_load) must be
    imaginary; its real part vanishing is a quadratic in x.
    """
    rl, xl = z_load.real, z_load.imag
    rt, xt = z_in.real, z_in.imag
    coeffs = [rt * (rl * rl + xl * xl) - rl * (rt * rt + xt * xt), 2 * (rt * xl + rl * xt), rt - rl]
    poly = np.trim_zeros(np.array(coeffs), "b")
    if len(poly) < 2:
        return []
    out = []
    for x in np.roots(poly[::-1]):
        if abs(x.imag) > 1e-9 * max(1.0, abs(x)):
            continue
        w = 1j * x.real
        try:
            b = (1 / (z_in - w) - 1 / (w + z_load)).imag
        except ZeroDivisionError:
            continue
        out.append((2 * x.real, b))
    return out


def foster_fit(omegas, values) -> list:
    """All positive (a, d, k, p) with a w - d/w + k w/(p - w^2) = values at four w.

    Multiplying through by (p - w^2) makes the system linear in (a, d, k)
    for fixed p, and the consistency determinant is a cubic in p.
    """
    # work in units of the geometric-mean frequency for conditioning
    w0 = math.exp(sum(math.log(w) for w in omegas) / len(omegas))
    omegas = [w / w0 for w in omegas]
    w = np.asarray(omegas)
    v = np.asarray(values, dtype=float)

    def det_at(p):
        lin = p - w * w
        return np.linalg.det(np.column_stack([w * lin, -lin / w, w, -v * lin]))

    # the determinant is a cubic in p: interpolate it exactly from four samples
    ps = np.array([0.0, 1.0, 2.0, 3.0])
    det = np.trim_zeros(np.polyfit(ps, [det_at(x) for x in ps], 3)[::-1], "b")
    if len(det) < 2:
        return []
    out = []
    for p in np.roots(det[::-1]):
        if abs(p.imag) > 1e-9 * abs(p) or p.real <= 0:
            continue
        p = p.real
        lin = p - w * w
        a_mat = np.column_stack([w * lin, -lin / w, w])
        rhs = v * lin
        sol, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
        if np.all(sol > 0):
            out.append((sol[0] / w0, sol[1] * w0, sol[2] * w0, p * w0 * w0))
    return out


def algebraic_candidates(prob: "SynthesisProblem", targets=None) -> list:
    """Exact lossless cells matching all four bands, over every per-band branch.

    ``targets`` optionally replaces z_in_target with one input impedance per band.
    """
    omegas = [2 * math.pi * f for f in prob.bands]
    targets = targets if targets is not None else [prob.z_in_target] * 4
    per_band = [band_reactances(zl, zt) for zl, zt in zip(prob.z_load, targets)]
    if any(not b for b in per_band):
        return []
    out = []
    for combo in itertools.product(*per_band):
        xs = [c[0] for c in combo]
        bs = [c[1] for c in combo]
        for a, d, k, p in foster_fit(omegas, xs):
            for ca, dd, kk, pp in foster_fit(omegas, bs):
                try:
                    out.append(ECRLHParams(
                        l_r_c=a, c_l_c=1 / d, l_l_c=1 / dd, c_r_c=ca,
                        l_r_d=k / p, c_l_d=1 / k, l_l_d=1 / kk, c_r_d=kk / pp,
                    ))
                except ContractError:
                    continue
    return out


# --------------------------------------------------------------------------
# problem / result types


@dataclass(frozen=True)
class SynthesisProblem:
    bands: tuple
    z_load: tuple
    z_in_target: complex = 50 + 0j
    bounds: dict = field(default_factory=dict)
    n_starts: int = 64
    seed: int = 42
    max_s11_db: Optional[float] = -15.0

    def __post_init__(self):
        bands = tuple(float(b) for b in self.bands)
        zl = tuple(complex(z) for z in self.z_load)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "z_load", zl)
        object.__setattr__(self, "z_in_target", complex(self.z_in_target))
        if len(bands) != 4 or len(zl) != 4:
            raise ContractError("synthesis needs exactly four bands and four load impedances")
        if any(b <= 0 for b in bands) or any(b2 <= b1 for b1, b2 in zip(bands, bands[1:])):
            raise ContractError("bands must be positive and strictly increasing")
        if not all(cmath.isfinite(z) for z in zl):
            raise ContractError("load impedances must be finite")
        if self.z_in_target == 0:
            raise ContractError("z_in_target must be nonzero")
        if not (isinstance(self.n_starts, int) and self.n_starts > 0):
            raise ContractError("n_starts must be a positive integer")
        b = {}
        for n in ECRLHParams.names():
            lo, hi = self.bounds.get(n, DEFAULT_L_BOUNDS if ECRLHParams.is_inductor(n) else DEFAULT_C_BOUNDS)
            if not (lo > 0 and hi >= lo):
                raise ContractError(f"bounds for {n} must satisfy 0 < min <= max")
            b[n] = (float(lo), float(hi))
        object.__setattr__(self, "bounds", b)


@dataclass(frozen=True)
class BandReport:
    freq: float
    theta: complex
    z_c: complex
    eq8_residual: complex
    z_in: complex
    s11_db: float


@dataclass(frozen=True)
class SynthesisResult:
    params: ECRLHParams
    residual_norm: float
    per_band: tuple
    start_index: int
    starts_converged: int
    exact: bool = True

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_file_units(),
            "residual_norm": self.residual_norm,
            "start_index": self.start_index,
            "starts_converged": self.starts_converged,
            "exact": self.exact,
            "per_band": [
                {
                    "freq_hz": b.freq,
                    "theta_rad": b.theta,
                    "z_c_ohm": b.z_c,
                    "eq8_residual": b.eq8_residual,
                    "z_in_ohm": b.z_in,
                    "s11_db": b.s11_db,
                }
                for b in self.per_band
            ],
        }


def _gamma(z: complex, z_t: complex) -> complex:
    # power-wave reflection; reduces to (z - z0)/(z + z0) for real targets
    return (z - z_t.conjugate()) / (z + z_t)


def stacked_residuals(params: ECRLHParams, prob: SynthesisProblem) -> np.ndarray:
    """Eight real residuals, scaled by |z_in_target|^2."""
    scale = abs(prob.z_in_target) ** 2
    out = np.empty(8)
    for i, (f, zl) in enumerate(zip(prob.bands, prob.z_load)):
        z, y = immittances(params, f)
        if y == 0:
            raise PoleProximityError("shunt admittance vanishes", "y")
        g = _eq8_from_cos(1 + z * y / 2, z / y, zl, prob.z_in_target) * scale
        out[2 * i] = g.real
        out[2 * i + 1] = g.imag
    return out


def _forward_error(params: ECRLHParams, prob: SynthesisProblem) -> float:
    try:
        return max(
            abs(terminate(cell_abcd(params, f), zl) - prob.z_in_target) / abs(prob.z_in_target)
            for f, zl in zip(prob.bands, prob.z_load)
        )
    except NumericalError:
        return math.inf


def band_reports(params: ECRLHParams, prob: SynthesisProblem) -> tuple:
    scale = abs(prob.z_in_target) ** 2
    reps = []
    for f, zl in zip(prob.bands, prob.z_load):
        d = dispersion(params, f)
        z, y = immittances(params, f)
        g = _eq8_from_cos(1 + z * y / 2, z / y, zl, prob.z_in_target) * scale
        zin = terminate(cell_abcd(params, f), zl)
        reps.append(BandReport(f, d.beta_p, d.z_c, g, zin, s11_to_db(_gamma(zin, prob.z_in_target))))
    return tuple(reps)


class _Space:
    """Log-space parameterisation over the free (non-pinned) elements."""

    def __init__(self, prob: SynthesisProblem):
        names = ECRLHParams.names()
        self.lo = np.log([prob.bounds[n][0] for n in names])
        self.hi = np.log([prob.bounds[n][1] for n in names])
        self.free = self.hi > self.lo

    def params(self, xf: np.ndarray) -> ECRLHParams:
        x = self.lo.copy()
        x[self.free] = xf
        return ECRLHParams.from_vector(np.exp(x))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo[self.free], self.hi[self.free])

    def to_free(self, p: ECRLHParams) -> np.ndarray:
        return np.clip(np.log(p.as_vector()), self.lo, self.hi)[self.free]


def _residual_fn(space: _Space, prob: SynthesisProblem):
    def fn(xf):
        try:
            r = stacked_residuals(space.params(xf), prob)
        except NumericalError:
            return np.full(8, _POLE_PENALTY)
        if not np.all(np.isfinite(r)):
            return np.full(8, _POLE_PENALTY)
        return r

    return fn


def _in_bounds(p: ECRLHParams, prob: SynthesisProblem) -> bool:
    return all(
        prob.bounds[n][0] * (1 - 1e-12) <= v <= prob.bounds[n][1] * (1 + 1e-12)
        for n, v in zip(ECRLHParams.names(), p.as_vector())
    )


def _max_gamma(p: ECRLHParams, prob: SynthesisProblem) -> float:
    try:
        return max(
            abs(_gamma(terminate(cell_abcd(p, f), zl), prob.z_in_target))
            for f, zl in zip(prob.bands, prob.z_load)
        )
    except NumericalError:
        return math.inf


def _gamma_fn(space: _Space, prob: SynthesisProblem):
    def fn(xf):
        p = space.params(xf)
        out = np.empty(8)
        try:
            for i, (f, zl) in enumerate(zip(prob.bands, prob.z_load)):
                g = _gamma(terminate(cell_abcd(p, f), zl), prob.z_in_target)
                out[2 * i], out[2 * i + 1] = g.real, g.imag
        except NumericalError:
            return np.full(8, 10.0)
        return out

    return fn


def _lsq(fn, xs, space):
    if not space.free.any():
        return xs, fn(xs)
    lo, hi = space.lo[space.free], space.hi[space.free]
    sol = least_squares(
        fn, np.clip(xs, lo, hi), bounds=(lo, hi), method="trf",
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400,
    )
    return sol.x, sol.fun


def _relaxed(prob: SynthesisProblem, space: _Space, rng: np.random.Generator, eq8_pool):
    """Best-reflection cell when no exact match exists inside the bounds.

    Input targets are drawn inside the acceptance circle of every band and
    solved exactly; the best few cells (plus the best eq8 compromises) are
    then polished on the stacked reflection coefficients.
    """
    r_acc = 10 ** (prob.max_s11_db / 20)
    seeds = []
    for k in range(prob.n_starts * 4):
        g = 0.9 * r_acc * np.sqrt(rng.uniform(size=4)) * np.exp(2j * math.pi * rng.uniform(size=4))
        zt = prob.z_in_target * (1 + g) / (1 - g)
        for p in algebraic_candidates(prob, list(zt)):
            if _in_bounds(p, prob):
                seeds.append((_max_gamma(p, prob), k, p))
    seeds.sort(key=lambda c: (c[0], c[1]))
    pool = [p for _, _, p in seeds[:8]] + list(eq8_pool)
    fn = _gamma_fn(space, prob)
    best = None
    for k, p in enumerate(pool):
        x, _ = _lsq(fn, space.to_free(p), space)
        q = space.params(x)
        cand = (_max_gamma(q, prob), k, q)
        if best is None or cand[:2] < best[:2]:
            best = cand
    return best


def synthesize(prob: SynthesisProblem, x0: Optional[Sequence[ECRLHParams]] = None) -> SynthesisResult:
    """Multi-start bounded least squares on the eight stacked residuals.

    Starts are the exact algebraic solutions that fit the bounds, any
    user-supplied ``x0`` cells, then ``n_starts`` log-uniform draws (only
    optimised when no earlier start already succeeded). Candidates that
    pass the forward termination check are preferred over mirrored-branch
    solutions; among equals the smallest residual wins, ties broken by
    start index.

    When no start gets below the failure residual and ``max_s11_db`` is set,
    a reflection-relaxed cell is returned if it meets ``max_s11_db`` at every
    band (``exact`` is then False).
    """
    space = _Space(prob)
    fn = _residual_fn(space, prob)
    rng = np.random.default_rng(prob.seed)
    seeded = [p for p in algebraic_candidates(prob) if _in_bounds(p, prob)]
    seeded += list(x0 or [])
    random_starts = [space.sample(rng) for _ in range(prob.n_starts)]
    starts = [space.to_free(p) for p in seeded] + random_starts

    def rank(c):
        res, fwd, k, _ = c
        ok = res < FAILURE_RESIDUAL and fwd <= FORWARD_RTOL
        return (0 if ok else 1, res, k)

    candidates = []
    for k, xs in enumerate(starts):
        done = any(rank(c)[0] == 0 and c[0] < SUCCESS_RESIDUAL for c in candidates)
        cands = [(xs, float(np.linalg.norm(fn(xs))))]
        if not done:
            try:
                x, r = _lsq(fn, xs, space)
                cands.append((x, float(np.linalg.norm(r))))
            except (ValueError, NumericalError):
                pass
        for x, res in cands:
            p = space.params(x)
            candidates.append((res, _forward_error(p, prob), k, p))

    best = min(candidates, key=rank)
    res, fwd, k, p = best
    converged = sum(1 for c in candidates if c[0] < SUCCESS_RESIDUAL and c[1] <= FORWARD_RTOL)
    exact = rank(best)[0] == 0
    if not exact:
        relaxed = None
        if prob.max_s11_db is not None:
            pool = [c[3] for c in sorted(candidates, key=rank)[:4]]
            relaxed = _relaxed(prob, space, rng, pool)
        if relaxed is None or 20 * math.log10(max(relaxed[0], 1e-300)) > prob.max_s11_db:
            raise SynthesisError(
                f"no start reached the failure threshold {FAILURE_RESIDUAL:g}; best residual {res:.3e}",
                best_residual=res,
                best_params=p,
            )
        p = relaxed[2]
        k = -1
    return SynthesisResult(
        params=p,
        residual_norm=float(np.linalg.norm(stacked_residuals(p, prob))),
        per_band=band_reports(p, prob),
        start_index=k,
        starts_converged=converged,
        exact=exact,
    )


def verify_matching(params: ECRLHParams, z_load_table, z0: float = 50.0) -> list:
    """Reflection at each (freq, z_load) row; rows hitting a pole yield None."""
    out = []
    for f, zl in z_load_table:
        try:
            out.append(reflection(terminate(cell_abcd(params, f), zl), z0))
        except NumericalError:
            out.append(None)
    return out


def snap(params: ECRLHParams, series: Sequence[float]) -> ECRLHParams:
    """Round each element to the nearest (log distance) value of a preferred series.

    ``series`` lists mantissas in [1, 10), repeated over all decades, e.g.
    the E12 list.
    """
    mant = sorted(float(m) for m in series)
    if not mant or mant[0] < 1 or mant[-1] >= 10:
        raise ContractError("series mantissas must lie in [1, 10)")
    vals = []
    for v in params.as_vector():
        dec = math.floor(math.log10(v))
        cands = [m * 10.0**e for e in (dec - 1, dec, dec + 1) for m in mant]
        vals.append(min(cands, key=lambda c: abs(math.log(c / v))))
    return ECRLHParams.from_vector(vals)


# --------------------------------------------------------------------------
# file formats


def read_z_load_csv(path) -> list:
    rows = qio.read_csv_rows(path)
    try:
        return [(float(r["freq_hz"]), complex(float(r["re_ohm"]), float(r["im_ohm"]))) for r in rows]
    except (KeyError, ValueError) as e:
        raise ContractError(f"{path}: expected columns freq_hz, re_ohm, im_ohm ({e})") from e


def s11_sweep(params: ECRLHParams, freqs, z_load_fn, z0: float = 50.0) -> list:
    """Rows (freq_hz, s11_db, re_zin, im_zin); pole rows carry NaN."""
    rows = []
    for f in freqs:
        try:
            zin = terminate(cell_abcd(params, f), z_load_fn(f))
            rep = reflection(zin, z0)
            rows.append((float(f), rep.s11_db, rep.z_in.real, rep.z_in.imag))
        except NumericalError:
            rows.append((float(f), math.nan, math.nan, math.nan))
    return rows


def local_minima_below(rows, threshold_db: float) -> list:
    """Frequencies of local |S11| minima under ``threshold_db`` in a swept table."""
    s = [r[1] for r in rows]
    out = []
    for i in range(1, len(s) - 1):
        if any(math.isnan(v) for v in s[i - 1:i + 2]):
            continue
        if s[i] < s[i - 1] and s[i] <= s[i + 1] and s[i] < threshold_db:
            out.append(rows[i][0])
    return out
