"""
🖥️ Command Line
===============
    python -m unfitted convergence --config include/studies/dirichlet_convergence.yml
    python -m unfitted solve --scheme neumann --n 32 --dump out/debug
    python -m unfitted rotate-sweep --config include/studies/rotation.yml --threads 4

Exit codes: 0 success, 2 failed cases or failed checks, 1 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from unfitted.config import LOG_LEVEL, SECTIONS, load_study_section
from unfitted.errors import ConfigError, UnfittedError
from unfitted.outputs import emit_outputs
from unfitted.quality import run_checks
from unfitted.studies import RUNNERS, StudyConfig, dump_artifacts, run_solve

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit code 1), not argparse's 2."""

    def error(self, message):
        raise ConfigError(f"❌ {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unfitted", description="Unfitted P1 finite elements: solves and studies")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for command in SECTIONS:
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", help="YAML study file; the section named after the command is read")
        sub.add_argument("--scheme")
        sub.add_argument("--problem")
        sub.add_argument("--n", type=_int_list, dest="levels", help="mesh levels, e.g. 16,32,64")
        sub.add_argument("--theta0", type=_float_list, help="rotation angles in radians")
        sub.add_argument("--gamma", type=float)
        sub.add_argument("--sigma", type=float)
        sub.add_argument("--gamma-div", type=float, dest="gamma_div")
        sub.add_argument("--gamma1", type=float, dest="gamma_1")
        sub.add_argument("--kappa", type=float)
        sub.add_argument("--graddiv-scaling", choices=["const", "h2"], dest="graddiv_scaling")
        sub.add_argument("--out", dest="output_dir")
        sub.add_argument("--threads", type=int)
        sub.add_argument("--seed", type=int)
        sub.add_argument("--log-level", default=LOG_LEVEL)
        if command == "solve":
            sub.add_argument("--dump", help="directory for mesh / Γ / matrix text dumps")
        else:
            sub.add_argument("--checks", help="YAML check file evaluated against the report")
    return parser


def _overrides(args) -> dict:
    keys = (
        "scheme", "problem", "levels", "theta0", "gamma", "sigma", "gamma_div",
        "gamma_1", "kappa", "graddiv_scaling", "output_dir", "threads", "seed",
    )
    return {key: getattr(args, key) for key in keys}


def run(args) -> int:
    try:
        section = load_study_section(args.config, args.command) if args.config else {}
        config = StudyConfig.from_mapping(section, **_overrides(args))
        if args.command == "solve":
            report, result = run_solve(config)
        else:
            report = RUNNERS[args.command](config)
    except ConfigError as e:
        logging.error(str(e))
        return EXIT_CONFIG

    exit_code = EXIT_OK
    try:
        emit_outputs(report, config.output_dir, name=config.name)
        if args.command == "solve" and args.dump:
            dump_artifacts(result, args.dump)
    except UnfittedError as e:
        logging.error(str(e))
        exit_code = EXIT_FAILED

    if report.failed:
        logging.warning(f"⚠️ {report.failed} case(s) failed")
        exit_code = EXIT_FAILED

    checks = getattr(args, "checks", None)
    if checks:
        try:
            results = run_checks(report, checks)
        except ConfigError as e:
            logging.error(str(e))
            return EXIT_CONFIG
        if not all(r.passed for r in results):
            exit_code = EXIT_FAILED

    if exit_code == EXIT_OK:
        logging.info(f"🎉 {args.command} finished: {len(report.rows)} row(s)")
    return exit_code


def _configure_logging(level) -> None:
    level = str(level).upper()
    if level not in LOG_LEVELS:
        raise ConfigError(f"❌ Unknown log level '{level}' (known: {', '.join(LOG_LEVELS)})")
    logging.basicConfig(level=level, format=LOG_FORMAT)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.log_level)
    except ConfigError as e:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
        logging.error(str(e))
        return EXIT_CONFIG
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
