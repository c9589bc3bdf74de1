"""
Main entry point for the EQPBench command-line interface.

This module configures logging, validates settings, builds the argument
parser from the command modules, and maps failures to exit codes:
- 0: success
- 1: usage error or invalid input
- 2: numerical failure (empty dictionary, solver failure, divergence, failure budget)
- 3: I/O error (datasets, models, counts files)
"""

import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from commands import benchmark, learning, states, tomography
from config.settings import LOG_FILE, LOG_LEVEL, validate_settings
from utils.constants import EXIT_IO, EXIT_NUMERICAL, EXIT_SUCCESS, EXIT_USAGE
from utils.database import close_database
from utils.errors import DatasetIOError, InvalidInputError, NumericalFailureError

logger = logging.getLogger("eqpbench")


class UsageError(Exception):
    """Raised by the parser instead of exiting with argparse's status 2."""


class EQPBenchParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def setup_logging(level: str = LOG_LEVEL, log_file: Optional[str] = LOG_FILE) -> None:
    """Log to stdout and (optionally) a UTF-8 file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
    )
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


def build_parser() -> EQPBenchParser:
    parser = EQPBenchParser(
        prog="eqpbench",
        description="Entanglement quasiprobabilities: reconstruction, certification and benchmarks.",
    )
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=EQPBenchParser)
    subparsers.required = True

    for module in (states, tomography, learning, benchmark):
        module.register(subparsers)
    return parser


def exit_code_for(error: BaseException) -> int:
    """Exit code of an exception escaping a command handler."""
    if isinstance(error, (UsageError, InvalidInputError)):
        return EXIT_USAGE
    if isinstance(error, (DatasetIOError, OSError)):
        return EXIT_IO
    # NumericalFailureError, LinAlgError (a ValueError) and anything unexpected
    return EXIT_NUMERICAL


async def run_command(args: argparse.Namespace) -> int:
    """Run the selected handler, always closing the results store."""
    try:
        return await args.handler(args)
    finally:
        await close_database()


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the command and return the process exit code.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:]).
    """
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"eqpbench: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if args.log_level:
        logging.getLogger().setLevel(getattr(logging, args.log_level.upper(), logging.INFO))

    try:
        validate_settings()
    except ValueError as e:
        logger.critical(f"❌ Configuration validation failed: {e}")
        return EXIT_USAGE

    try:
        return asyncio.run(run_command(args)) or EXIT_SUCCESS
    except KeyboardInterrupt:
        logger.info("Stopped by user (Ctrl+C)")
        return EXIT_USAGE
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_USAGE:
            logger.error(f"❌ {e}")
        elif isinstance(e, (NumericalFailureError, DatasetIOError, OSError)):
            logger.error(f"❌ {type(e).__name__}: {e}")
        else:
            logger.critical(f"Fatal error: {e}", exc_info=e)
        print(f"eqpbench: error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    setup_logging()
    sys.exit(main())
