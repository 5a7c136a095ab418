"""
motionguide/utils/logging.py
Loguru sinks for the command line, with stdlib logging routed into them.
"""

import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from loguru import logger

from motionguide.core.exceptions import ConfigurationError, StorageError

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss.SSS}</green> <level>{level: <8}</level> "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time} {level} {name}:{function}:{line} - {message}"

# third-party loggers that are chatty at DEBUG (PNG chunk traces, plugin scans)
QUIET_LOGGERS = ("PIL",)


class InterceptHandler(logging.Handler):
    """Forwards stdlib logging records to loguru at the caller's frame."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno
        frame, depth = logging.currentframe(), 2
        while frame is not None and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1
        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


def _check_level(log_level: str) -> str:
    name = str(log_level).upper()
    try:
        logger.level(name)
    except ValueError:
        raise ConfigurationError(
            f"unknown log level '{log_level}' (use TRACE, DEBUG, INFO, SUCCESS, WARNING, ERROR or CRITICAL)"
        ) from None
    return name


def setup_logging(log_level: str = "INFO", log_dir: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """
    Installs the motionguide sinks: stderr always, plus a rotating file under
    ``log_dir`` when given. Safe to call again; earlier sinks are replaced.

    Args:
        log_level: Minimum level name, case-insensitive.
        log_dir: Directory of the log file; no file sink when None.

    Returns:
        Path of the log file, or None without ``log_dir``.
    """
    level = _check_level(log_level)
    logger.remove()
    # stdout carries the --json summary
    logger.add(sys.stderr, level=level, format=CONSOLE_FORMAT)

    log_path = None
    if log_dir is not None:
        log_dir = Path(log_dir)
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"Cannot create log directory {log_dir}: {e}") from e
        log_path = log_dir / datetime.now().strftime("motionguide_%Y-%m-%d_%H-%M-%S.log")
        logger.add(log_path, level=level, rotation="10 MB", compression="zip", format=FILE_FORMAT)

    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logger.debug(f"Logging at {level}" + (f", file {log_path}" if log_path else ""))
    return log_path
