"""
Reusable decorators for the command-line handlers and the results store.

- Backoff retries for results-store calls that hit SQLite lock contention.
- Command usage logging.
- Wall-clock timing of long-running handlers.
"""

import asyncio
import logging
import sqlite3
import time
from argparse import Namespace
from functools import wraps
from typing import Callable

from config.settings import DB_RETRY_ATTEMPTS, DB_RETRY_BASE_DELAY, DB_RETRY_MAX_DELAY

logger = logging.getLogger("eqpbench.decorators")


TRANSIENT_SQLITE_MESSAGES = ("database is locked", "database is busy", "unable to open database")


def is_transient_sqlite_error(error: Exception) -> bool:
    """Lock contention between concurrent sweeps, as opposed to schema or SQL errors."""
    message = str(error).lower()
    return isinstance(error, sqlite3.OperationalError) and any(m in message for m in TRANSIENT_SQLITE_MESSAGES)


def retry_on_error(
    max_retries: int = DB_RETRY_ATTEMPTS,
    should_retry: Callable[[Exception], bool] = is_transient_sqlite_error,
    base_delay: float = DB_RETRY_BASE_DELAY,
    max_delay: float = DB_RETRY_MAX_DELAY,
):
    """
    Retry an async results-store call with exponential backoff.

    Only errors accepted by ``should_retry`` are retried; a malformed query or
    a missing table fails on the first attempt. Delay after attempt k is
    ``min(base_delay * 2**k, max_delay)``.

    Raises:
        Exception: The last error once the attempts are used up, or the first
            error that is not retryable.
    """

    def decorator(func: Callable):
        @wraps(func)
        async def wrapper(*args, **kwargs):
            attempt = 0
            while True:
                try:
                    return await func(*args, **kwargs)
                except Exception as e:
                    attempt += 1
                    if not should_retry(e):
                        raise
                    if attempt >= max_retries:
                        logger.error(f"{func.__name__} gave up after {attempt} attempts: {e}")
                        raise
                    delay = min(base_delay * 2 ** (attempt - 1), max_delay)
                    logger.warning(
                        f"Results store busy in {func.__name__}, retrying",
                        extra={"attempt": attempt, "max_retries": max_retries, "delay_s": delay},
                    )
                    await asyncio.sleep(delay)

        return wrapper

    return decorator


def _describe(args: Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "handler" and v is not None}


def log_command_usage(func: Callable):
    """
    Decorator to log a command invocation with its parsed arguments.

    Expects the handler's first positional argument to be the argparse namespace.
    """

    @wraps(func)
    async def wrapper(*args, **kwargs):
        namespace = args[0] if args else kwargs.get("args")
        if isinstance(namespace, Namespace):
            command = getattr(namespace, "command", func.__name__)
            logger.info(f"Command '{command}' started", extra={"arguments": _describe(namespace)})
        return await func(*args, **kwargs)

    return wrapper


def timed(func: Callable):
    """Log the wall-clock duration of an async handler, also when it raises."""

    @wraps(func)
    async def wrapper(*args, **kwargs):
        start = time.perf_counter()
        try:
            return await func(*args, **kwargs)
        finally:
            elapsed = time.perf_counter() - start
            logger.info(f"{func.__name__} finished in {elapsed:.2f}s", extra={"elapsed_s": elapsed})

    return wrapper
