"""Command line interface: ``sagnacwv {simulate,fit,sweep,report,selftest}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error (for sweeps the
rows CSV is still written with per-point error tags).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, load_config, parse_modes
from .errors import ConfigError, SagnacError
from .estimator import fit_gaussian, write_fits_csv
from .harness import (
    intervals_to_csv,
    read_rows_csv,
    report,
    run_sweep,
    well_behaved_intervals,
    write_rows_csv,
)
from .instrument import generate_pulse_train, read_trace, slice_pulses, write_trace_binary, write_trace_csv
from .signal_model import Mode, TiltState, WorkingPoint

log = logging.getLogger("sagnacwv")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _load(args) -> ExperimentConfig:
    exp = load_config(args.config) if args.config else load_config()
    sweep = exp.sweep
    if getattr(args, "seed", None) is not None:
        sweep = replace(sweep, seed=args.seed)
    if getattr(args, "mode", None):
        sweep = replace(sweep, modes=parse_modes(args.mode))
    if getattr(args, "workers", None):
        sweep = replace(sweep, workers=args.workers)
    return replace(exp, sweep=sweep)


def _write_report(rows, exp: ExperimentConfig, out: Path, svg: bool) -> str:
    from .plotting import save_figures

    intervals = well_behaved_intervals(rows, exp.rel_tol)
    rep = report(rows, intervals, exp.sweep.geometry)
    (out / "summary.txt").write_text(rep.text)
    (out / "intervals.csv").write_text(intervals_to_csv(intervals))
    save_figures(rows, exp.sweep.train.envelope.tau, out, svg=svg)
    return rep.text


def cmd_simulate(args) -> int:
    exp = _load(args)
    cfg = exp.sweep
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for mode in cfg.modes:
        phi = args.phi if args.phi is not None else cfg.grid(mode)[0]
        wp = WorkingPoint.DARK_PORT if mode is Mode.WVA else WorkingPoint.BALANCED
        traces = generate_pulse_train(
            replace(cfg.train, seed=cfg.seed),
            TiltState(phi, cfg.omega0_true),
            replace(cfg.geometry, working_point=wp),
            mode,
            cfg.noise,
            cfg.filt,
            bright=(mode is Mode.WVA),
        )
        for tr in traces:
            stem = out / f"{mode.value}_{tr.channel.value}"
            write_trace_binary(tr, stem.with_suffix(".trc"))
            if args.csv:
                write_trace_csv(tr, stem.with_suffix(".csv"))
            print(f"{stem.with_suffix('.trc')}: {len(tr)} samples, dt = {tr.dt:g} s, phi = {phi:g} rad")
    return EXIT_OK


def cmd_fit(args) -> int:
    exp = _load(args)
    period = args.period or exp.sweep.train.period
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in args.traces:
        trace = read_trace(path)
        fits = [fit_gaussian(p) for p in slice_pulses(trace, period)]
        dest = out / (Path(path).stem + "_fits.csv")
        write_fits_csv(fits, dest)
        bad = sum(not f.converged for f in fits)
        print(f"{dest}: {len(fits)} pulses fitted, {bad} not converged")
    return EXIT_OK


def cmd_sweep(args) -> int:
    exp = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(exp.sweep)
    write_rows_csv(rows, out / "rows.csv")
    print(_write_report(rows, exp, out, args.svg), end="")
    return EXIT_RUNTIME if any(r.error for r in rows) else EXIT_OK


def cmd_report(args) -> int:
    exp = _load(args)
    rows = read_rows_csv(args.rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(_write_report(rows, exp, out, args.svg), end="")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sagnacwv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode=True):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", default=".", help="output directory")
        if mode:
            p.add_argument("--mode", choices=["wva", "abwv", "both"])

    p = sub.add_parser("simulate", help="write simulated traces")
    common(p)
    p.add_argument("--phi", type=float, help="working angle in rad (default: first grid point)")
    p.add_argument("--csv", action="store_true", help="also write CSV traces")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit every pulse of trace files")
    common(p, mode=False)
    p.add_argument("traces", nargs="+")
    p.add_argument("--period", type=float, help="pulse period in s (default: 1/f_r)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="run a phi sweep and write rows.csv plus report")
    common(p)
    p.add_argument("--svg", action="store_true", help="also write SVG figures")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize a rows CSV")
    common(p, mode=False)
    p.add_argument("rows")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SagnacError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
