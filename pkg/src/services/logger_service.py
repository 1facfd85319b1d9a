"""Logging configuration and utilities."""

import logging
import time
from collections.abc import Generator, Mapping
from contextlib import contextmanager
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.logging import RichHandler

from src.config import settings
from src.constants import LOG_BACKUP_COUNT, LOG_ROTATION_BYTES

console = Console()


def setup_logging(verbose: bool = False, log_to_file: bool = True) -> None:
    """
    Configure logging for the application.

    Args:
        verbose: Enable verbose (DEBUG) logging
        log_to_file: Enable logging to file with rotation (also gated by settings)
    """
    log_level = logging.DEBUG if verbose else logging.INFO

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers = []

    console_handler = RichHandler(
        rich_tracebacks=True,
        console=console,
        show_time=verbose,
        show_path=verbose,
        markup=False,
    )
    console_handler.setLevel(log_level)
    console_handler.setFormatter(logging.Formatter("%(message)s"))
    root_logger.addHandler(console_handler)

    if log_to_file and settings.log_to_file:
        log_dir = Path(settings.log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = log_dir / f"qgl_{timestamp}.log"

        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=LOG_ROTATION_BYTES,
            backupCount=LOG_BACKUP_COUNT,
            encoding="utf-8",
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(
            logging.Formatter(
                fmt="%(asctime)s | %(levelname)-8s | %(name)s:%(lineno)d | %(message)s",
                datefmt="%Y-%m-%d %H:%M:%S",
            )
        )
        root_logger.addHandler(file_handler)
        logging.getLogger(__name__).info(f"Logging to file: {log_file}")

    mode = "VERBOSE" if verbose else "SIMPLE"
    logging.getLogger(__name__).debug(
        f"Logging initialized - Mode: {mode}, Level: {logging.getLevelName(log_level)}"
    )


@contextmanager
def log_performance(
    operation: str, logger: logging.Logger | None = None, timing: dict | None = None
) -> Generator[None, None, None]:
    """
    Context manager to log operation performance.

    Args:
        operation: Name of the operation being measured
        logger: Logger instance (uses module logger if None)
        timing: Optional dict receiving the elapsed seconds under "elapsed"

    Usage:
        with log_performance("Build generator", logger):
            ...
    """
    logger = logger or logging.getLogger(__name__)
    start_time = time.perf_counter()
    logger.debug(f"[{operation}] Starting...")

    try:
        yield
    finally:
        elapsed = time.perf_counter() - start_time
        if timing is not None:
            timing["elapsed"] = elapsed
        logger.debug(f"[{operation}] Completed in {elapsed:.3f}s")


def log_check(record: Mapping[str, Any], logger: logging.Logger | None = None) -> None:
    """
    Log a numerical check record.

    Args:
        record: Mapping with check_name, measured, bound and pass keys
        logger: Logger instance (uses module logger if None)
    """
    logger = logger or logging.getLogger(__name__)
    passed = bool(record.get("pass", True))
    bound = record.get("bound")
    bound_text = "-" if bound is None else f"{bound:.3e}"
    log_msg = (
        f"[CHECK] {record.get('check_name', '?')} | measured={record.get('measured', 0.0):.3e}"
        f" | bound={bound_text} | {'PASS' if passed else 'FAIL'}"
    )
    if passed:
        logger.debug(log_msg)
    else:
        logger.warning(log_msg)


def cleanup_old_logs(max_age_days: int = 7) -> None:
    """
    Clean up log files older than max_age_days.

    Args:
        max_age_days: Maximum age of log files to keep
    """
    logger = logging.getLogger(__name__)
    log_dir = Path(settings.log_dir)

    if not log_dir.exists():
        return

    cutoff_time = time.time() - (max_age_days * 24 * 60 * 60)
    deleted_count = 0

    for log_file in log_dir.glob("qgl_*.log*"):
        if log_file.stat().st_mtime < cutoff_time:
            log_file.unlink()
            deleted_count += 1

    if deleted_count > 0:
        logger.debug(f"Cleaned up {deleted_count} old log files (>{max_age_days} days)")
