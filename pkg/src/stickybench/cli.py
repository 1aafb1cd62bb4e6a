"""Command line: ``stickybench run|report|validate``.

Exit codes: 0 success, 1 invalid config or input, 2 at least one trial failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from typing import Optional, Sequence

from .config import OUTPUT_ENV_VAR, ConfigError, load_config, resolve_output_dir
from .runner import EXIT_INVALID, EXIT_OK, EXIT_TRIAL_FAILED, build_cells, run_experiment, summarize, write_reports

log = logging.getLogger("stickybench")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    parser = argparse.ArgumentParser(prog="stickybench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run an experiment grid")
    run.add_argument("config", help="path to a JSON experiment config")
    run.add_argument("--jobs", type=_positive, default=1, help="worker processes (default 1)")
    run.add_argument("--out", default=None,
                     help=f"output directory (default: config output_dir, then ${OUTPUT_ENV_VAR})")

    report = sub.add_parser("report", parents=[common], help="rebuild CSV and SVG reports from saved records")
    report.add_argument("records", help="output directory of a run, or its records/ subdirectory")

    validate = sub.add_parser("validate", parents=[common], help="check a config without running it")
    validate.add_argument("config")
    return parser


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        log.error("invalid config: %s", exc)
        return EXIT_INVALID
    out = resolve_output_dir(cfg, args.out)
    n = len(build_cells(cfg))
    log.info("running %d trials with %d worker(s) into %s", n, args.jobs, out)
    start = time.perf_counter()
    try:
        code = run_experiment(cfg, out, jobs=args.jobs, log=log.error)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    log.info("finished in %.1fs", time.perf_counter() - start)
    log.info("\n%s", summarize(out))
    if code == EXIT_TRIAL_FAILED:
        log.error("some trials failed; partial records were kept in %s", out)
    return code


def _cmd_report(args) -> int:
    try:
        written = write_reports(args.records)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        log.error("cannot build report: %s", exc)
        return EXIT_INVALID
    for path in written.values():
        log.info("wrote %s", path)
    log.info("\n%s", summarize(args.records))
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        log.error("invalid config: %s", exc)
        return EXIT_INVALID
    log.info("ok: %d agents x %d games x %d settings x %d trials, %d frames each",
             len(cfg.agents), len(cfg.games), len(cfg.stochasticity), cfg.trials_per_cell,
             cfg.frame_budget)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    handler = {"run": _cmd_run, "report": _cmd_report, "validate": _cmd_validate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
