"""Command-line entry point: ``adaptrhc run|verify|list-presets``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from .config import PRESETS, ConfigError, apply_override, build_scenario, load_config, preset
from .sim import SimulationDiverged, run_scenario
from .svgplot import write_run_plots

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("adaptrhc")


def setup_logging() -> None:
    raw = os.environ.get("RHC_LOG", "warn").strip().lower()
    level = _LEVELS.get(raw)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("adaptrhc")
    root.handlers[:] = [handler]
    root.setLevel(level if level is not None else logging.WARNING)
    root.propagate = False
    if level is None:
        log.warning("ignoring RHC_LOG=%r; expected one of error, warn, info, debug", raw)


def _write_outputs(traj, scenario, csv_path, svg_path):
    traj.to_csv(csv_path)
    log.info("wrote %s (%d rows)", csv_path, len(traj))
    if svg_path is not None:
        for p in write_run_plots(traj, svg_path, scenario.unknown, scenario.name):
            log.info("wrote %s", p)


def cmd_run(args) -> int:
    try:
        name, cfg = load_config(args.config)
        for assignment in args.set or []:
            apply_override(cfg, assignment)
        scenario = build_scenario(cfg, name=name)
    except ConfigError as exc:
        print(f"adaptrhc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    csv_path = Path(args.out_csv or scenario.output_csv or f"{name}.csv")
    svg_path = args.out_svg or scenario.output_svg
    for p in (csv_path, Path(svg_path) if svg_path else None):
        if p is not None and not p.resolve().parent.is_dir():
            print(f"adaptrhc: config error: output directory does not exist: {p.parent}",
                  file=sys.stderr)
            return EXIT_CONFIG

    log.info("running %s: %d samples of %g days", name, scenario.n_steps + 1, scenario.cfg.t_s)
    start = time.perf_counter()
    try:
        traj = run_scenario(scenario)
    except SimulationDiverged as exc:
        _write_outputs(exc.log, scenario, csv_path, svg_path)
        print(f"adaptrhc: numerical divergence: {exc}", file=sys.stderr)
        print(f"adaptrhc: partial log ({len(exc.log)} rows) written to {csv_path}", file=sys.stderr)
        return EXIT_DIVERGED
    _write_outputs(traj, scenario, csv_path, svg_path)
    log.info("%s finished in %.2f s", name, time.perf_counter() - start)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .checks import format_table, verify_preset

    try:
        scenario = build_scenario(preset(args.preset), name=args.preset)
    except ConfigError as exc:
        print(f"adaptrhc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = verify_preset(scenario)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_list_presets(args) -> int:
    for name, cfg in PRESETS.items():
        print(f"{name}\t{cfg['run']['duration']:g} days, unknown: {', '.join(cfg['model']['unknown'])}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptrhc",
        description="Adaptive receding-horizon synchronization for HIV parameter estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a preset or a TOML scenario file")
    run.add_argument("config", help="preset name or path to a scenario file")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config entry, e.g. nrhc.t_s=0.005 (repeatable)")
    run.add_argument("--out-csv", metavar="PATH", help="trajectory CSV (default from config)")
    run.add_argument("--out-svg", metavar="PATH",
                     help="plot base path; writes PATH_states.svg, _controls.svg, _estimates.svg")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="run the oracle cross-checks on a preset")
    verify.add_argument("preset")
    verify.set_defaults(func=cmd_verify)

    lst = sub.add_parser("list-presets", help="show the built-in scenarios")
    lst.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which matches the config-error code
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
