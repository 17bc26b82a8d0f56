"""Command-line entry point: ``qbeh --config run.json <subcommand>``.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure,
4 I/O error. Every output file is written atomically.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as qio
from .config import Config, load_config
from .ecrlh import ECRLHParams, cell_abcd
from .errors import ConfigError, ContractError, NumericalError, UsageError
from .metrics import Scenario, power_sweep, sttp, sweep_csv
from .netcore import reflection, terminate
from .optimizer import OptimizeSpec, maximize_dc
from .sim import PF, dbm_to_watts, large_signal_zin, small_signal_zin, transient
from .synth import SynthesisProblem, s11_sweep, synthesize
from .volterra import KernelContext, dc_closed_form

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

COMMANDS = ("synth", "s11", "zin", "transient", "dc", "sweep", "sttp", "optimize", "export-touchstone")


class Run:
    """Resolved configuration plus output helpers for one invocation."""

    def __init__(self, cfg: Config, out_dir: Path, quiet: bool):
        self.cfg = cfg
        self.out = out_dir
        self.quiet = quiet
        self.rect = cfg.rectifier()
        self.opts = cfg.sim.build()
        self.bands = cfg.bands.hz
        self.formats = set(cfg.output.formats)

    def say(self, msg: str):
        if not self.quiet:
            print(msg)

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            qio.write_csv(self.out / name, header, rows)
            self.say(f"wrote {self.out / name}")

    def json(self, name, obj):
        if "json" in self.formats:
            qio.write_json(self.out / name, obj)
            self.say(f"wrote {self.out / name}")

    # shared pieces -----------------------------------------------------

    def scenario(self) -> Scenario:
        e = self.cfg.excitation
        if e.scenario == "single_band":
            return Scenario("single_band", freq=e.single_band_ghz * 1e9, bands=self.bands)
        if e.scenario == "multitone":
            return Scenario("multitone", bands=self.bands, n_per_band=e.n_per_band, spacing=e.spacing_mhz * 1e6)
        return Scenario("quad_band", bands=self.bands)

    def scenarios(self) -> list:
        main = self.scenario()
        out = [main]
        if self.cfg.excitation.compare_single_band and main.kind != "single_band":
            out += [Scenario("single_band", freq=f, bands=self.bands) for f in self.bands]
        return out

    def z_load_table(self):
        p = dbm_to_watts(self.cfg.synthesis.design_dbm)
        return [(f, large_signal_zin(self.rect, f, p, self.opts)) for f in self.bands]

    def synthesis(self):
        s = self.cfg.synthesis
        table = self.z_load_table()
        prob = SynthesisProblem(
            bands=self.bands,
            z_load=tuple(z for _, z in table),
            z_in_target=complex(s.z_in_target_ohm),
            bounds=s.bounds(),
            n_starts=s.n_starts,
            seed=self.cfg.seed,
            max_s11_db=s.max_s11_db,
        )
        return table, synthesize(prob)

    def matching_cell(self) -> ECRLHParams:
        if self.cfg.ecrlh is not None:
            return self.cfg.ecrlh.build()
        return self.synthesis()[1].params

    def freq_grid(self):
        b = self.cfg.s11
        return np.linspace(b.f_start_ghz * 1e9, b.f_stop_ghz * 1e9, b.n_points)

    def s11_rows(self, cell):
        z0 = self.rect.z_source
        return s11_sweep(cell, self.freq_grid(), lambda f: small_signal_zin(self.rect, f), z0)


S11_HEADER = ("freq_hz", "s11_db", "re_zin_ohm", "im_zin_ohm")


def cmd_synth(run: Run):
    table, res = run.synthesis()
    doc = res.to_dict()
    doc["z_load"] = [{"freq_hz": f, "z_ohm": z} for f, z in table]
    run.json("synth_result.json", doc)
    run.csv("synth_s11.csv", S11_HEADER, run.s11_rows(res.params))
    run.say(f"residual_norm={res.residual_norm:.3e} exact={res.exact} "
            f"s11_db={[round(b.s11_db, 2) for b in res.per_band]}")


def cmd_s11(run: Run):
    run.csv("s11.csv", S11_HEADER, run.s11_rows(run.matching_cell()))


def cmd_zin(run: Run):
    rows = []
    for f in run.bands:
        for dbm in sorted(run.cfg.excitation.sweep_dbm):
            z = large_signal_zin(run.rect, f, dbm_to_watts(dbm), run.opts)
            rows.append((f, float(dbm), z.real, z.imag))
    run.csv("zin.csv", ("freq_hz", "p_dbm", "re_ohm", "im_ohm"), rows)


def cmd_transient(run: Run):
    e = run.cfg.excitation
    tones = run.scenario().tones(e.point_dbm, run.rect.z_source)
    cell = run.matching_cell() if e.use_matching else None
    res = transient(run.rect, tones, run.opts, matching=cell)
    rows = zip(res.t.tolist(), res.v_j1.tolist(), res.v_j2.tolist(), res.i_l.tolist())
    run.csv("transient.csv", ("t_s", "v_j1_v", "v_j2_v", "i_l_a"), rows)
    run.json("transient.json", {
        "scenario": run.scenario().tag,
        "per_tone_dbm": e.point_dbm,
        "i_dc_a": res.i_dc,
        "v_dc_v": res.v_dc,
        "p_dc_w": res.p_dc,
        "converged": res.converged,
        "cycles_used": res.cycles_used,
        "i_c2_avg_a": res.i_c2_avg,
        "matching": cell.to_file_units() if cell else None,
    })
    run.say(f"i_dc={res.i_dc:.6e} A v_dc={res.v_dc:.6e} V converged={res.converged}")


def cmd_dc(run: Run):
    e = run.cfg.excitation
    tones = run.scenario().tones(e.point_dbm, run.rect.z_source)
    r = dc_closed_form(KernelContext(run.rect.diode, run.rect, tones))
    run.json("dc.json", {
        "scenario": run.scenario().tag,
        "per_tone_dbm": e.point_dbm,
        "i_dc_a": r.i_dc,
        "v_dc_v": r.v_dc,
        "audit": r.audit,
    })
    run.say(f"i_dc={r.i_dc:.6e} A v_dc={r.v_dc:.6e} V")


def _sweep(run: Run, scenarios):
    e = run.cfg.excitation
    cell = run.matching_cell() if e.use_matching else None
    return power_sweep(run.rect, cell, scenarios, e.sweep_dbm, e.engine, run.opts, e.eta_ant)


def cmd_sweep(run: Run):
    rows = _sweep(run, run.scenarios())
    if "csv" in run.formats:
        qio.atomic_write_text(run.out / "sweep.csv", sweep_csv(rows))
        run.say(f"wrote {run.out / 'sweep.csv'}")
    bad = [r for r in rows if not r.valid]
    if bad:
        print(f"warning: {len(bad)} sweep point(s) failed", file=sys.stderr)


def cmd_sttp(run: Run):
    scenarios = run.scenarios()
    rows = _sweep(run, scenarios)
    thr = run.cfg.excitation.sttp_threshold_w
    main = scenarios[0].tag
    doc = {
        "scenario": main,
        "threshold_w": thr,
        "sttp_dbm": sttp([r for r in rows if r.scenario == main], thr),
    }
    if len(scenarios) > 1:
        doc["single_band_sttp_dbm"] = {
            s.tag: sttp([r for r in rows if r.scenario == s.tag], thr) for s in scenarios[1:]
        }
    run.json("sttp.json", doc)
    if "csv" in run.formats:
        qio.atomic_write_text(run.out / "sttp_sweep.csv", sweep_csv(rows))
    run.say(f"sttp_dbm={doc['sttp_dbm']}")


def cmd_optimize(run: Run):
    o = run.cfg.optimize
    spec = OptimizeSpec(
        circuit=run.rect,
        variables=tuple(o.variables),
        bounds={"c1": tuple(v * PF for v in o.c1_bounds_pf), "c2": tuple(v * PF for v in o.c2_bounds_pf)},
        dbm_list=tuple(o.dbm_list),
        bands=run.bands,
        engine=o.engine,
        aggregate=o.aggregate,
        budget=o.budget,
        seed=run.cfg.seed,
        sim=run.opts,
    )
    res = maximize_dc(spec)
    run.csv("optimize_trace.csv", ("eval_idx", "c1_f", "c2_f", "objective_a"), res.trace_rows())
    run.json("optimize_best.json", {
        "c1_f": res.best["c1"],
        "c2_f": res.best["c2"],
        "objective_a": res.objective,
        "evaluations": len(res.trace),
        "converged": res.converged,
        "aggregate": o.aggregate,
        "engine": o.engine,
    })
    run.say(f"best c1={res.best['c1']:.4e} F c2={res.best['c2']:.4e} F objective={res.objective:.6e} A")


def touchstone_text(cell: ECRLHParams, rect, freqs) -> str:
    z0 = rect.z_source
    lines = ["! S11 of the matched rectifier input", f"# HZ S RI R {z0:g}"]
    for f in sorted(freqs):
        try:
            g = reflection(terminate(cell_abcd(cell, f), small_signal_zin(rect, f)), z0).gamma
        except NumericalError:
            continue
        lines.append(f"{qio.fmt(float(f))} {qio.fmt(g.real)} {qio.fmt(g.imag)}")
    return "\n".join(lines) + "\n"


def cmd_export_touchstone(run: Run):
    if "s1p" in run.formats:
        path = run.out / "matched.s1p"
        qio.atomic_write_text(path, touchstone_text(run.matching_cell(), run.rect, run.freq_grid()))
        run.say(f"wrote {path}")


HANDLERS = {
    "synth": cmd_synth,
    "s11": cmd_s11,
    "zin": cmd_zin,
    "transient": cmd_transient,
    "dc": cmd_dc,
    "sweep": cmd_sweep,
    "sttp": cmd_sttp,
    "optimize": cmd_optimize,
    "export-touchstone": cmd_export_touchstone,
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="JSON run configuration (required)")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the configured seed")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress progress output")
    p = argparse.ArgumentParser(prog="qbeh", parents=[common], description="Quad-band rectenna analysis toolkit")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__name__[4:].replace("_", " "))
    return p


def run(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    ns = vars(args)
    if "config" not in ns:
        print("error: --config PATH is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(ns["config"])
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if "seed" in ns:
        cfg = cfg.model_copy(update={"seed": ns["seed"]})
    out = Path(ns.get("out", cfg.output.directory))
    try:
        HANDLERS[ns["command"]](Run(cfg, out, ns.get("quiet", False)))
    except (ConfigError, ContractError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
