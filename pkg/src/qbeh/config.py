"""JSON run configuration: schema, validation and conversion to domain objects.

Units live in the key names (``c1_pf``, ``r_l_ohm``...). Unknown keys are
rejected, and every violation is reported with its dotted path before any
computation starts.
"""
from __future__ import annotations

import json
from typing import Annotated, List, Literal, Optional, Tuple

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .diode import DiodeParams
from .ecrlh import NH, PF, ECRLHParams
from .errors import ConfigError
from .sim import RectifierCircuit, SimOptions

Pos = Field(gt=0)


def _bounds_ok(v):
    lo, hi = v
    if not (lo > 0 and hi >= lo):
        raise ValueError("bounds must satisfy 0 < min <= max")
    return v


Bounds = Annotated[Tuple[float, float], AfterValidator(_bounds_ok)]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DiodeBlock(_Block):
    i_s_a: float = Field(3e-6, gt=0)
    n: float = Field(1.06, ge=1)
    r_s_ohm: float = Field(25.0, ge=0)
    c_j0_pf: float = Field(0.18, gt=0)
    v_j_v: float = Field(0.35, gt=0)
    b_v_v: float = Field(3.8, gt=0)
    i_bv_a: float = Field(3e-4, gt=0)
    e_g_ev: float = Field(0.69, gt=0)
    temperature_k: float = Field(300.0, gt=0)

    def build(self) -> DiodeParams:
        return DiodeParams(
            i_s=self.i_s_a, n=self.n, r_s=self.r_s_ohm, c_j0=self.c_j0_pf * PF, v_j=self.v_j_v,
            b_v=self.b_v_v, i_bv=self.i_bv_a, e_g=self.e_g_ev, temperature=self.temperature_k,
        )


class CircuitBlock(_Block):
    # 100 pF is a toolkit default, not a measured board value
    c1_pf: float = Field(100.0, gt=0)
    c2_pf: float = Field(100.0, gt=0)
    r_l_ohm: float = Field(11e3, gt=0)
    z_source_ohm: float = Field(50.0, gt=0)


class BandsBlock(_Block):
    freqs_ghz: List[float] = [0.75, 1.8, 2.4, 5.8]

    @field_validator("freqs_ghz")
    @classmethod
    def _four_increasing(cls, v):
        if len(v) != 4:
            raise ValueError("exactly four band centres are required")
        if any(f <= 0 for f in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("band centres must be positive and strictly increasing")
        return v

    @property
    def hz(self) -> tuple:
        return tuple(f * 1e9 for f in self.freqs_ghz)


class EcrlhBlock(_Block):
    l_r_c_nh: float = Pos
    c_l_c_pf: float = Pos
    l_l_c_nh: float = Pos
    c_r_c_pf: float = Pos
    l_r_d_nh: float = Pos
    c_l_d_pf: float = Pos
    l_l_d_nh: float = Pos
    c_r_d_pf: float = Pos

    def build(self) -> ECRLHParams:
        return ECRLHParams.from_file_units(self.model_dump())


class SynthesisBlock(_Block):
    l_bounds_nh: Bounds = (0.1, 200.0)
    c_bounds_pf: Bounds = (0.01, 10.0)
    n_starts: int = Field(64, ge=1)
    z_in_target_ohm: float = Field(50.0, gt=0)
    design_dbm: float = -30.0
    max_s11_db: Optional[float] = -15.0

    def bounds(self) -> dict:
        out = {}
        for n in ECRLHParams.names():
            if ECRLHParams.is_inductor(n):
                out[n] = (self.l_bounds_nh[0] * NH, self.l_bounds_nh[1] * NH)
            else:
                out[n] = (self.c_bounds_pf[0] * PF, self.c_bounds_pf[1] * PF)
        return out


class ExcitationBlock(_Block):
    scenario: Literal["quad_band", "single_band", "multitone"] = "quad_band"
    single_band_ghz: float = Field(2.4, gt=0)
    point_dbm: float = -30.0
    sweep_dbm: List[float] = [-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 5.0]
    n_per_band: int = Field(12, ge=1)
    spacing_mhz: float = Field(5.0, gt=0)
    engine: Literal["oracle", "closed_form"] = "oracle"
    use_matching: bool = False
    sttp_threshold_w: float = Field(20e-6, ge=0)
    compare_single_band: bool = True
    eta_ant: float = Field(1.0, gt=0, le=1)

    @field_validator("sweep_dbm")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("sweep_dbm must not be empty")
        return v


class SimBlock(_Block):
    steps_per_period_of_fmax: int = Field(200, ge=1)
    max_cycles: int = Field(2000, ge=1)
    dc_drift_tol: float = Field(1e-5, gt=0)
    newton_tol: float = Field(1e-10, gt=0)
    newton_max_iter: int = Field(50, ge=1)

    def build(self) -> SimOptions:
        return SimOptions(**self.model_dump())


class S11Block(_Block):
    f_start_ghz: float = Field(0.5, gt=0)
    f_stop_ghz: float = Field(6.5, gt=0)
    n_points: int = Field(601, ge=2)

    @model_validator(mode="after")
    def _ordered(self):
        if self.f_stop_ghz <= self.f_start_ghz:
            raise ValueError("f_stop_ghz must exceed f_start_ghz")
        return self


class OptimizeBlock(_Block):
    variables: List[Literal["c1", "c2"]] = ["c1", "c2"]
    c1_bounds_pf: Bounds = (1.0, 1000.0)
    c2_bounds_pf: Bounds = (1.0, 1000.0)
    dbm_list: List[float] = [-30.0, -20.0, -10.0]
    engine: Literal["closed_form", "oracle"] = "closed_form"
    aggregate: Literal["mean", "min"] = "mean"
    budget: int = Field(500, ge=1)

    @field_validator("variables", "dbm_list")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("must not be empty")
        return v


class OutputBlock(_Block):
    directory: str = "out"
    formats: List[Literal["csv", "json", "s1p"]] = ["csv", "json", "s1p"]


class Config(_Block):
    seed: int = 42
    diode: DiodeBlock = DiodeBlock()
    circuit: CircuitBlock = CircuitBlock()
    bands: BandsBlock = BandsBlock()
    ecrlh: Optional[EcrlhBlock] = None
    synthesis: SynthesisBlock = SynthesisBlock()
    excitation: ExcitationBlock = ExcitationBlock()
    sim: SimBlock = SimBlock()
    s11: S11Block = S11Block()
    optimize: OptimizeBlock = OptimizeBlock()
    output: OutputBlock = OutputBlock()

    def rectifier(self) -> RectifierCircuit:
        c = self.circuit
        return RectifierCircuit(
            c1=c.c1_pf * PF, c2=c.c2_pf * PF, r_l=c.r_l_ohm,
            diode=self.diode.build(), z_source=c.z_source_ohm,
        )


def _problems(err: ValidationError) -> list:
    out = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{path}: {e['msg']}")
    return out


def parse_config(data) -> Config:
    try:
        return Config.model_validate(data)
    except ValidationError as e:
        probs = _problems(e)
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(probs), probs) from None


def load_config(path) -> Config:
    """Read and validate; OSError propagates for missing/unreadable files."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})", [f"<root>: {e}"]) from None
    return parse_config(data)
