"""
Centralized Logging Configuration

Provides rotating file handlers, level-coloured console output and a
simulation-time field so that every record can be placed on the sim clock.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Callable, Optional, Union

CONSOLE_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | t=%(sim_time)s | %(message)s"
FILE_FORMAT = (
    "%(asctime)s | %(levelname)-8s | %(name)s | %(funcName)s:%(lineno)d "
    "| t=%(sim_time)s | %(message)s"
)
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


class LevelColorFormatter(logging.Formatter):
    """
    Formatter that colours the level name when the console is a terminal.
    """

    COLORS = {
        "DEBUG": "\033[36m",
        "INFO": "\033[32m",
        "WARNING": "\033[33m",
        "ERROR": "\033[31m",
        "CRITICAL": "\033[35m",
    }
    RESET = "\033[0m"

    def __init__(self, fmt: str, datefmt: str, stream=None):
        super().__init__(fmt, datefmt=datefmt)
        self.stream = stream or sys.stderr

    def format(self, record: logging.LogRecord) -> str:
        if not (hasattr(self.stream, "isatty") and self.stream.isatty()):
            return super().format(record)
        # Work on a copy so the file handler sees the plain level name
        colored = logging.makeLogRecord(record.__dict__)
        color = self.COLORS.get(record.levelname)
        if color:
            colored.levelname = f"{color}{record.levelname}{self.RESET}"
        return super().format(colored)


class SimTimeFilter(logging.Filter):
    """Supplies a placeholder sim_time for records logged outside a simulation."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "sim_time"):
            record.sim_time = "-"
        return True


class SimTimeAdapter(logging.LoggerAdapter):
    """
    Logger adapter stamping records with the current simulation clock.

    The clock is read lazily through a callable so one adapter can live
    for the whole run.
    """

    def __init__(self, logger: logging.Logger, clock: Callable[[], float]):
        super().__init__(logger, {})
        self._clock = clock

    def process(self, msg, kwargs):
        extra = dict(kwargs.get("extra") or {})
        extra.setdefault("sim_time", f"{self._clock():.2f}")
        kwargs["extra"] = extra
        return msg, kwargs


def setup_logger(
    name: str,
    level: Union[int, str] = logging.INFO,
    log_file: Optional[str] = None,
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
) -> logging.Logger:
    """
    Set up a logger with a console handler and an optional rotating file handler.

    Args:
        name: Logger name (usually __name__)
        level: Logging level as an int or a level name such as "INFO"
        log_file: Path to log file (None for console only)
        max_bytes: Maximum size of log file before rotation
        backup_count: Number of backup files to keep

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Prevent adding duplicate handlers
    if logger.handlers:
        return logger

    time_filter = SimTimeFilter()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(LevelColorFormatter(CONSOLE_FORMAT, DATE_FORMAT, sys.stderr))
    console_handler.addFilter(time_filter)
    logger.addHandler(console_handler)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file, maxBytes=max_bytes, backupCount=backup_count
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        file_handler.addFilter(time_filter)
        logger.addHandler(file_handler)

    return logger


def sim_logger(logger: logging.Logger, clock: Callable[[], float]) -> SimTimeAdapter:
    """
    Wrap a module logger so its records carry the simulation time.

    Args:
        logger: Logger returned by setup_logger
        clock: Zero-argument callable returning the current simulation time

    Returns:
        Adapter that logs through the same handlers
    """
    return SimTimeAdapter(logger, clock)
