"""
Command line entry point.

    python -m src analyze --config analysis.json [--format text|csv|json] [--output PATH]
    python -m src simulate --scenario 1 --n 1000 --reps 1000 --seed 7 [--sizes 250 1000] [--jobs 4]
    python -m src simulate --table --reps 1000 [--sizes 250 500 1000]
    python -m src version

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from src import __version__
from src.config import setup_logging
from src.utils import (
    CircularEffectsError, ConfigError, DataError, DomainError, NumericalError, generate_run_id,
    pipeline_stage,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def exit_code_for(error: Exception) -> int:
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, (DataError, DomainError)):
        return EXIT_DATA
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circular-effects",
        description="Causal effects on circular outcomes by inverse probability weighting",
    )
    parser.add_argument("--log-level", default=None, help="overrides CIRCEFF_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="estimate ADTE/ALTE from a CSV described by a config file")
    analyze.add_argument("--config", required=True, help="JSON analysis config")
    analyze.add_argument("--format", choices=["text", "csv", "json"], default=None, dest="report_format")
    analyze.add_argument("--output", default=None, help="report path (stdout otherwise)")

    simulate = sub.add_parser("simulate", help="Monte Carlo study of the estimators")
    which = simulate.add_mutually_exclusive_group(required=True)
    which.add_argument("--scenario", type=int, choices=[1, 2, 3])
    which.add_argument(
        "--table", action="store_true",
        help="all scenarios over --sizes (default 250 500 1000)",
    )
    simulate.add_argument("--n", type=int, default=1000)
    simulate.add_argument("--sizes", type=int, nargs="+", default=None, help="sweep several sample sizes")
    simulate.add_argument("--reps", type=int, default=1000)
    simulate.add_argument("--seed", type=int, default=20240601)
    simulate.add_argument("--jobs", type=int, default=1)
    simulate.add_argument("--output", default=None, help="summary CSV path (stdout otherwise)")
    simulate.add_argument("--progress", action="store_true")

    sub.add_parser("version", help="print the package version")
    return parser


def _analyze(args, run_id: str) -> int:
    from src.analysis import parse_config, run_analysis
    from src.reporting import emit_report, emit_vectors

    config = parse_config(args.config, overrides={"report_format": args.report_format})
    report = run_analysis(config, run_id=run_id)

    output = args.output or config.output.report
    with pipeline_stage("report", run_id):
        try:
            emit_report(report, config.report_format, path=output, stream=None if output else sys.stdout)
            if config.output.vectors is not None:
                emit_vectors(report, config.output.vectors, config.output.weights)
        except OSError as e:
            raise DataError(f"cannot write output: {e}") from None
    return EXIT_OK


def _simulate(args, run_id: str) -> int:
    from src.simulation import SCENARIOS, TABLE_SIZES, run_table

    if args.table:
        scenarios, sizes = SCENARIOS, args.sizes or TABLE_SIZES
    else:
        scenarios, sizes = [args.scenario], args.sizes or [args.n]
    try:
        table = run_table(
            scenarios=scenarios,
            sizes=sizes,
            replications=args.reps,
            seed=args.seed,
            n_jobs=args.jobs,
            progress=args.progress or None,
            run_id=run_id,
        )
    except ValidationError as e:
        raise ConfigError(f"invalid simulation settings: {e.errors()[0]['msg']}") from None

    if args.output:
        table.to_csv(args.output, index=False, lineterminator="\n")
        logger.info(f"[{run_id}] wrote summary to {args.output}")
    else:
        table.to_csv(sys.stdout, index=False, lineterminator="\n")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    if args.command == "version":
        print(__version__)
        return EXIT_OK

    run_id = generate_run_id("ANA" if args.command == "analyze" else "SIM")
    try:
        if args.command == "analyze":
            return _analyze(args, run_id)
        return _simulate(args, run_id)
    except CircularEffectsError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
