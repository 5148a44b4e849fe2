"""Command-line harness: ``gasmetro {bounds,sweep-fig3,sweep-fig4,simulate,verify}``."""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .config import FIG3_DEFAULTS, FIG4_DEFAULTS, ConfigError
from .experiments import bounds_rows, rows_to_csv, rows_to_json, simulate, sweep_fig3, sweep_fig4

log = logging.getLogger("gasmetro")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML key-value config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, dest="n_trials", help="Monte-Carlo trials per point")
    p.add_argument("--grid", type=int, help="posterior grid nodes per axis")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=config_mod.FORMATS)
    p.add_argument("--workers", type=int, help="worker processes for sweep rows")
    p.add_argument("--model", help="model kind (bounds/simulate)")
    p.add_argument("--povm", help="POVM label (bounds/simulate)")
    p.add_argument("-m", type=int, dest="m", help="total qubits per trial")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gasmetro", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("bounds", "QFIm, Uhlmann curvature, QCRB, HCRB and FIm at each configured point"),
        ("sweep-fig3", "MCM+Bell vs Parallel+MUB Monte-Carlo sweep"),
        ("sweep-fig4", "AAMCM vs MEM Monte-Carlo sweep at phi = pi/4"),
        ("simulate", "Monte-Carlo run of one model/POVM pipeline"),
    ]:
        _common(sub.add_parser(name, help=help_))
    v = sub.add_parser("verify", help="run the invariant suite; exit 1 on failure")
    v.add_argument("--out", help="write the JSON summary here as well")
    return parser


def _bounds_csv(rows) -> str:
    cols = ["schema_version", "model", "povm", "theta", "phi", "scalar_qcrb", "hcrb", "tr_wfinv",
            "qfim", "uhlmann", "fim", "error"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([json.dumps(r[c]) if isinstance(r[c], list) else ("" if r[c] is None else repr(r[c]) if isinstance(r[c], float) else r[c]) for c in cols])
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _load(args, defaults) -> config_mod.RunConfig:
    overrides = {k: getattr(args, k, None) for k in ("seed", "n_trials", "grid", "out", "format", "workers", "model", "povm", "m")}
    return config_mod.load(args.config, defaults, **overrides)


def cmd_bounds(args) -> int:
    cfg = _load(args, {})
    rows = bounds_rows(cfg)
    for r in rows:
        if r["error"]:
            log.warning("theta=%.4g phi=%.4g: %s", r["theta"], r["phi"], r["error"])
    _emit(rows_to_json(rows) if cfg.format == "json" else _bounds_csv(rows), cfg.out)
    return EXIT_OK


def _cmd_sweep(args, defaults, runner) -> int:
    cfg = _load(args, defaults)
    rows = runner(cfg)
    for r in rows:
        if r.error:
            log.warning("%s/%s theta=%.4g phi=%.4g: %s", r.model, r.povm, r.theta, r.phi, r.error)
    _emit(rows_to_json(rows) if cfg.format == "json" else rows_to_csv(rows), cfg.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_all

    summary = run_all()
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    for section, results in summary["sections"].items():
        for r in results:
            log.info("%s %s.%s", "PASS" if r["passed"] else "FAIL", section, r["check"])
    return EXIT_OK if summary["passed"] else EXIT_VERIFY_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "bounds":
            return cmd_bounds(args)
        if args.command == "sweep-fig3":
            return _cmd_sweep(args, FIG3_DEFAULTS, sweep_fig3)
        if args.command == "sweep-fig4":
            return _cmd_sweep(args, FIG4_DEFAULTS, sweep_fig4)
        if args.command == "simulate":
            return _cmd_sweep(args, {}, simulate)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
