#!/usr/bin/env python3
"""
Command-line entry point.

  python -m misalign.main analytic --sir-db 4 --snr-db 10 --delta 0 0.25 0.5
  python -m misalign.main simulate --scheme a --n 1000 --blocks 1000
  python -m misalign.main figure fig2 --blocks 1000 --workers 4
  python -m misalign.main gap --a data/results/fig2.csv --filter-a delta=0 --filter-b delta=0.5 --target 1e-3
  python -m misalign.main validate --quick
  python -m misalign.main waveform --scheme a --n 8 --delta 0.25 --out data/results/a.bin

Flags override spec-file values, which override environment defaults.
Exit status: 0 success, 1 validation failure, 2 invalid arguments.
"""

import sys
import argparse
import logging
import pathlib
from typing import Dict, List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from . import config
from .analytics import (
    avg_ber,
    avg_esinr_closed,
    ber_block,
    ber_first_symbol,
    ber_steady_state,
    esinr,
)
from .errors import CurveRangeError, MisalignError, ParameterError, SpecError
from .experiments import (
    analytic_gap_profile,
    build_spec,
    load_spec_file,
    measure_db_gap,
    parse_list,
    read_curve,
    run_experiment,
    write_csv,
)
from .models import ChannelParams, Conventional, SchemeA, SchemeB, derive_seed
from .simulation import estimate_ber, generate_block
from .validation import validate_all
from .waveform import WaveformConfig, default_oversampling, dump_waveform, scheme_geometry, synthesize

logger = logging.getLogger("misalign")
console = Console()

FIGURES = ("fig2", "fig3", "fig4", "fig5")

# kind, fixed dB, lo, hi for the summary gap printed after a figure run
FIGURE_GAPS = {
    "fig2": ("sir_delta", 10.0, 1.0, 12.0),
    "fig3": ("snr_delta", 4.0, 10.0, 15.0),
    "fig4": ("sir_avg_ber", 10.0, 1.0, 12.0),
    "fig5": ("sir_avg_esinr", 10.0, 5.0, 15.0),
}


# ---------------- helpers ----------------
def _mark(ok: bool) -> str:
    return "✅" if ok else "❌"


def _fmt(v: Optional[float], spec: str = ".5g") -> str:
    return "" if v is None else format(v, spec)


def _params(args) -> ChannelParams:
    sir = 4.0 if args.sir_db is None else args.sir_db
    snr = 10.0 if args.snr_db is None else args.snr_db
    return ChannelParams.from_db(sir, snr)


def _scheme_from_args(args, delta: float = 0.0):
    if args.scheme in (None, "conv"):
        return Conventional(delta0=delta)
    if args.scheme == "a":
        return SchemeA(n_block=args.n, delta0=delta)
    k = config.DEFAULT_SCHEME_B_K if args.k is None else args.k
    k1 = 0 if args.k1 is None else args.k1
    k2 = min(1, k) if args.k2 is None else args.k2
    return SchemeB(n_block=args.n, k_max=k, k1=k1, k2=k2, delta0=delta)


def _spec_overrides(args) -> Dict[str, object]:
    """Flag values keyed by ExperimentSpec field; unset flags are None and do not override"""
    return {
        "axis": getattr(args, "axis", None),
        "values": parse_list(args.values) if getattr(args, "values", None) else None,
        "sir_db": args.sir_db,
        "snr_db": args.snr_db,
        "deltas": args.delta,
        "schemes": [args.scheme] if args.scheme else None,
        "n_block": args.n,
        "trials": args.blocks,
        "k_max": args.k,
        "seed": args.seed,
        "out": args.out,
        "workers": args.workers,
    }


def _results_table(rows, title: str) -> Table:
    table = Table(title=title)
    for col in ("SIR dB", "SNR dB", "delta", "scheme", "analytic BER", "sim BER", "3σ", "eSINR"):
        table.add_column(col, justify="right")
    for r in rows:
        agree = ""
        if r.sim_ber is not None and r.analytic_ber is not None:
            agree = _mark(abs(r.sim_ber - r.analytic_ber) <= 3 * r.sim_stderr)
        table.add_row(
            f"{r.sir_db:g}", f"{r.snr_db:g}", _fmt(r.delta, "g"), r.scheme,
            _fmt(r.analytic_ber), _fmt(r.sim_ber), agree,
            _fmt(r.esinr_linear if r.esinr_linear is not None else r.avg_esinr_linear, ".4f"),
        )
    return table


# ---------------- commands ----------------
def cmd_analytic(args) -> int:
    params = _params(args)
    n = config.DEFAULT_BLOCK_LEN if args.n is None else args.n
    table = Table(title=f"SIR {params.sir_db:.2f} dB, SNR {params.snr_db:.2f} dB, N = {n}")
    for col in ("delta", "eSINR", "first symbol", "steady state", f"block (N={n})"):
        table.add_column(col, justify="right")
    for d in args.delta or [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]:
        table.add_row(
            f"{d:g}", f"{esinr(params, d):.5f}", f"{ber_first_symbol(params, d):.6g}",
            f"{ber_steady_state(params, d):.6g}", f"{ber_block(params, d, n):.6g}",
        )
    table.add_row("averaged", f"{avg_esinr_closed(params):.5f}", "", f"{avg_ber(params):.6g}", "")
    console.print(table)
    return 0


def cmd_simulate(args) -> int:
    if args.spec or args.values:
        file_values = load_spec_file(args.spec) if args.spec else {}
        spec = build_spec(file_values, _spec_overrides(args))
        rows = run_experiment(spec)
        path = write_csv(rows, spec.output_path())
        console.print(_results_table(rows, spec.experiment))
        console.print(f"✅ Wrote {len(rows)} rows to {path}")
        return 0

    params = _params(args)
    args.n = config.DEFAULT_BLOCK_LEN if args.n is None else args.n
    delta = (args.delta or [0.0])[0]
    scheme = _scheme_from_args(args, delta)
    stretched = args.scheme in ("a", "b")
    randomize = args.randomize or (stretched and not args.fixed)
    blocks = config.DEFAULT_BLOCKS if args.blocks is None else args.blocks
    seed = config.DEFAULT_SEED if args.seed is None else args.seed
    workers = config.WORKERS if args.workers is None else args.workers
    est = estimate_ber(params, scheme, blocks, args.n, seed, randomize=randomize, workers=workers)
    if randomize or stretched:
        # drawn offsets (per packet for conv, swept inside the packet for A/B) average to the same law
        ref, label = avg_ber(params), "averaged BER"
    else:
        ref, label = ber_block(params, delta, args.n), f"block BER (delta={delta:g})"
    ok = est.agrees_with(ref)
    console.print(
        f"{_mark(ok)} {scheme.label}: {est.errors}/{est.trials} errors, BER {est.ber:.6g} ± {est.std_err:.2g}; "
        f"{label} {ref:.6g}"
    )
    return 0


def cmd_figure(args) -> int:
    spec_path = pathlib.Path(args.spec) if args.spec else pathlib.Path(config.SPEC_DIR) / f"{args.name}.spec"
    file_values = load_spec_file(spec_path)
    file_values.setdefault("experiment", args.name)
    spec = build_spec(file_values, _spec_overrides(args))
    rows = run_experiment(spec)
    path = write_csv(rows, spec.output_path())
    console.print(_results_table(rows, f"{args.name} ({spec_path.name})"))

    kind, fixed, lo, hi = FIGURE_GAPS[args.name]
    prof = [g for g in analytic_gap_profile(kind, fixed, lo, hi, n_block=spec.n_block) if float(g.x_db).is_integer()]
    gaps = Table(title=f"analytic dB gap ({kind})")
    for col in ("x dB", "level", "gap dB"):
        gaps.add_column(col, justify="right")
    for g in prof:
        gaps.add_row(f"{g.x_db:g}", f"{g.level:.4g}", f"{g.gap_db:.3f}")
    console.print(gaps)
    console.print(f"✅ Wrote {len(rows)} rows to {path}")
    return 0


def _filters(pairs: Optional[List[str]]) -> Dict[str, str]:
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise SpecError(f"expected column=value, got '{p}'", field="filter")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_gap(args) -> int:
    curve_a = read_curve(args.a, args.x, args.y, _filters(args.filter_a))
    curve_b = read_curve(args.b or args.a, args.x, args.y, _filters(args.filter_b))
    gap = measure_db_gap(curve_a, curve_b, args.target)
    console.print(f"gap at {args.y} = {args.target:g}: {gap:.3f} dB (x_B - x_A)")
    return 0


def cmd_validate(args) -> int:
    seed = config.DEFAULT_SEED if args.seed is None else args.seed
    report = validate_all(seed, symbols_per_point=args.symbols, quick=args.quick)
    table = Table(title=f"validation (seed {seed})")
    for col in ("", "check", "deviation", "detail"):
        table.add_column(col)
    for c in report.checks:
        table.add_row(_mark(c.passed), c.name, _fmt(c.deviation, ".3g"), c.detail)
    console.print(table)
    failed = report.failed()
    if failed:
        console.print(f"❌ {len(failed)} of {len(report.checks)} checks failed")
        return 1
    console.print(f"✅ all {len(report.checks)} checks passed")
    return 0


def cmd_waveform(args) -> int:
    params = _params(args)
    args.n = 8 if args.n is None else args.n
    scheme = _scheme_from_args(args)
    m = default_oversampling(args.n) if args.oversampling is None else args.oversampling
    geo = scheme_geometry(scheme, m, args.n)
    tau0 = round((args.delta or [0.0])[0] * geo.tx1_durations[0])
    cfg = WaveformConfig(oversampling=m, tx1_durations=geo.tx1_durations, tx2_durations=geo.tx2_durations, tau0=tau0)
    seed = config.DEFAULT_SEED if args.seed is None else args.seed
    b1 = generate_block(args.n, derive_seed(seed, 1))
    b2 = generate_block(args.n, derive_seed(seed, 2))
    wave = synthesize(cfg, b1, b2, params.noiseless() if args.noiseless else params, derive_seed(seed, 3))
    out = args.out or str(pathlib.Path(config.RESULTS_DIR) / f"waveform_{scheme.label}.bin")
    path = dump_waveform(out, wave)
    console.print(f"✅ {wave.n_ticks} ticks ({m} per T, tau0 = {tau0} ticks) written to {path}")
    return 0


# ---------------- parser ----------------
def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sir-db", type=float, default=None)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--delta", type=float, nargs="+", default=None, help="offset(s) as a fraction of T")
    p.add_argument("--scheme", choices=["conv", "a", "b"], default=None)
    p.add_argument("--n", type=int, default=None, help="symbols per block")
    p.add_argument("--k", type=int, default=None, help="Scheme B max draw K")
    p.add_argument("--blocks", type=int, default=None, help="Monte Carlo blocks per point")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--spec", default=None, help="experiment spec file")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--log-level", default=config.LOG_LEVEL)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="misalign", description="Symbol-misalignment interference toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form tables for one (SIR, SNR)")
    _common(p)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="Monte Carlo point, or a sweep with --spec/--values")
    _common(p)
    p.add_argument("--axis", choices=["sir", "snr"], default=None)
    p.add_argument("--values", default=None, help="sweep values: 'a,b,c' or 'start:stop:step'")
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--k2", type=int, default=None)
    p.add_argument("--randomize", action="store_true", help="conventional runs: draw delta0 per block")
    p.add_argument("--fixed", action="store_true", help="Scheme A/B: keep --delta, --k1, --k2 for every block")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figure", help="reproduce one of the figure sweeps")
    p.add_argument("name", choices=FIGURES)
    _common(p)
    p.add_argument("--axis", choices=["sir", "snr"], default=None)
    p.add_argument("--values", default=None)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("gap", help="horizontal dB gap between two CSV curves")
    p.add_argument("--a", required=True, help="CSV holding curve A")
    p.add_argument("--b", default=None, help="CSV holding curve B (defaults to --a)")
    p.add_argument("--x", default="sir_db")
    p.add_argument("--y", default="analytic_ber")
    p.add_argument("--filter-a", nargs="*", default=None, metavar="COL=VALUE")
    p.add_argument("--filter-b", nargs="*", default=None, metavar="COL=VALUE")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--log-level", default=config.LOG_LEVEL)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("validate", help="run the full check suite")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--symbols", type=int, default=10 ** 6, help="Monte Carlo symbols per point")
    p.add_argument("--quick", action="store_true", help="reduced Monte Carlo budget")
    p.add_argument("--log-level", default=config.LOG_LEVEL)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("waveform", help="dump a synthesized R1 waveform")
    _common(p)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--k2", type=int, default=None)
    p.add_argument("--oversampling", type=int, default=None)
    p.add_argument("--noiseless", action="store_true")
    p.set_defaults(func=cmd_waveform)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config.setup_logging(args.log_level)
    try:
        return args.func(args)
    except (SpecError, ParameterError, CurveRangeError, ValidationError) as e:
        console.print(f"❌ {e}")
        return 2
    except MisalignError as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
