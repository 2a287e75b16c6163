"""Logging for ensembles and sweeps.

Records carry the run (and sweep cell) they were emitted from, so a warning
from one of thousands of stochastic runs can be traced back to its index and
replayed. Console output goes through ``tqdm.write`` and never tears the
progress bars drawn by ensembles; the rotating log file keeps the full
history across invocations.
"""

import logging
import os
import sys
from contextlib import contextmanager
from contextvars import ContextVar
from logging.handlers import RotatingFileHandler
from typing import Iterator, List, Optional, TextIO, Tuple

from tqdm import tqdm

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(context)s] %(message)s"

_context: ContextVar[Tuple[str, ...]] = ContextVar("log_context", default=())


@contextmanager
def log_context(**fields: object) -> Iterator[None]:
    """Tag every record logged inside the block, e.g. ``log_context(run=12)``.

    Nested blocks append to the enclosing tags.
    """
    tags = _context.get() + tuple(f"{key}={value}" for key, value in fields.items())
    token = _context.set(tags)
    try:
        yield
    finally:
        _context.reset(token)


def current_context() -> str:
    return " ".join(_context.get()) or "-"


class ContextFilter(logging.Filter):
    """Adds the ``context`` attribute used by ``LOG_FORMAT``."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.context = current_context()
        return True


class TqdmHandler(logging.StreamHandler):
    """Console handler that writes above any active progress bar."""

    def __init__(self, stream: Optional[TextIO] = None) -> None:
        super().__init__(stream if stream is not None else sys.stderr)

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record), file=self.stream)
            self.flush()
        except Exception:
            self.handleError(record)


def setup_logging(
    log_level: int = logging.INFO,
    log_file: Optional[str] = None,
    log_format: str = LOG_FORMAT,
    max_bytes: int = 10 * 1024 * 1024,  # 10 MB
    backup_count: int = 5,
) -> None:
    """Configure the root logger.

    Console output goes to stderr: several commands print machine-readable
    results on stdout.

    Args:
        log_level: The logging level to use
        log_file: Optional path to a log file
        log_format: Format string; may use ``%(context)s``
        max_bytes: Maximum size of log file before rotation
        backup_count: Number of backup files to keep
    """
    handlers: List[logging.Handler] = [TqdmHandler()]

    if log_file:
        try:
            log_dir = os.path.dirname(log_file)
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            handlers.append(
                RotatingFileHandler(log_file, maxBytes=max_bytes, backupCount=backup_count)
            )
        except OSError as e:
            print(f"Warning: Could not set up file logging: {e}", file=sys.stderr)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    context_filter = ContextFilter()
    for handler in handlers:
        handler.setFormatter(logging.Formatter(log_format))
        handler.addFilter(context_filter)
        root_logger.addHandler(handler)


def parse_log_level(name: str, default: int = logging.INFO) -> int:
    """Translate a level name such as ``"debug"`` into its numeric value.

    Unknown names give ``default``.
    """
    levels = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40, "CRITICAL": 50}
    return levels.get(name.upper(), default)


def get_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    logger = logging.getLogger(name)
    if level is not None:
        logger.setLevel(level)
    return logger
