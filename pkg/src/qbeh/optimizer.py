"""Derivative-free search for the coupling/storage capacitors maximising DC output."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ContractError, NumericalError, UsageError
from .metrics import BANDS, multitone_scenario
from .sim import PF, RectifierCircuit, SimOptions, transient
from .volterra import KernelContext, dc_closed_form

VARIABLES = ("c1", "c2")
N_STARTS = 8


@dataclass(frozen=True)
class OptimizeSpec:
    circuit: RectifierCircuit = field(default_factory=RectifierCircuit)
    variables: tuple = VARIABLES
    bounds: dict = field(default_factory=lambda: {v: (1 * PF, 1000 * PF) for v in VARIABLES})
    dbm_list: tuple = (-30.0, -20.0, -10.0)
    bands: tuple = BANDS
    engine: str = "closed_form"
    aggregate: str = "mean"
    budget: int = 500
    seed: int = 42
    sim: SimOptions = field(default_factory=SimOptions)

    def __post_init__(self):
        if not self.variables:
            raise ContractError("at least one variable is required")
        for v in self.variables:
            if v not in VARIABLES:
                raise ContractError(f"unknown variable {v!r}; choose from {VARIABLES}")
            lo, hi = self.bounds.get(v, (None, None))
            if lo is None or not (lo > 0 and hi >= lo):
                raise ContractError(f"bounds for {v} must satisfy 0 < min <= max")
        if self.engine not in ("closed_form", "oracle"):
            raise UsageError(f"unknown engine {self.engine!r}")
        if self.aggregate not in ("mean", "min"):
            raise UsageError(f"unknown aggregate {self.aggregate!r}")
        if not (isinstance(self.budget, int) and self.budget >= 1):
            raise ContractError("budget must be a positive integer")
        if not self.dbm_list:
            raise ContractError("dbm_list must not be empty")


@dataclass
class TracePoint:
    eval_idx: int
    c1: float
    c2: float
    objective: float


@dataclass
class OptimizeResult:
    best: dict
    objective: float
    trace: list
    converged: bool

    def trace_rows(self):
        return [(t.eval_idx, t.c1, t.c2, t.objective) for t in self.trace]


def objective(spec: OptimizeSpec, circuit: RectifierCircuit) -> float:
    """Aggregated DC load current over the power list under quad-band drive."""
    vals = []
    for dbm in spec.dbm_list:
        tones = multitone_scenario(1, spec.bands, 0.0, dbm, circuit.z_source)
        if spec.engine == "closed_form":
            vals.append(dc_closed_form(KernelContext(circuit.diode, circuit, tones)).i_dc)
        else:
            vals.append(transient(circuit, tones, spec.sim).i_dc)
    return float(np.mean(vals)) if spec.aggregate == "mean" else float(min(vals))


class _Budget(Exception):
    pass


def maximize_dc(spec: OptimizeSpec) -> OptimizeResult:
    """Nelder-Mead in log space from eight seeded starts, sharing one evaluation budget."""
    lo = np.log([spec.bounds[v][0] for v in spec.variables])
    hi = np.log([spec.bounds[v][1] for v in spec.variables])
    free = hi > lo
    trace = []

    def circuit_at(xf):
        x = lo.copy()
        x[free] = xf
        vals = dict(zip(spec.variables, np.exp(x)))
        return spec.circuit.replace(**vals)

    def evaluate(xf):
        if len(trace) >= spec.budget:
            raise _Budget
        c = circuit_at(xf)
        try:
            val = objective(spec, c)
        except NumericalError:
            val = -math.inf
        trace.append(TracePoint(len(trace), c.c1, c.c2, val))
        return val

    converged = False
    if not free.any():
        evaluate(np.zeros(0))
    else:
        rng = np.random.default_rng(spec.seed)
        starts = [rng.uniform(lo[free], hi[free]) for _ in range(N_STARTS)]
        nm_bounds = list(zip(lo[free], hi[free]))
        for x0 in starts:
            try:
                # scale to O(1) so the absolute fatol is meaningful
                ref = abs(evaluate(x0)) or 1.0
                if not math.isfinite(ref):
                    ref = 1.0
                res = minimize(
                    lambda x: -evaluate(x) / ref, x0, method="Nelder-Mead", bounds=nm_bounds,
                    options={"xatol": 1e-3, "fatol": 1e-7, "maxfev": spec.budget},
                )
                converged = converged or bool(res.success)
            except _Budget:
                break
    best = max(trace, key=lambda t: (t.objective, -t.eval_idx))
    return OptimizeResult(
        best={"c1": best.c1, "c2": best.c2},
        objective=best.objective,
        trace=trace,
        converged=converged,
    )
