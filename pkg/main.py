"""Entry point for the protocol toolkit.

This script sets up logging from the environment, installs signal handlers
and runs the command line interface.
"""

import signal
import sys
from typing import Any

from src.cli import cli
from src.config.settings import LOG_FILE, LOG_LEVEL
from src.utils.logging import get_logger, parse_log_level, setup_logging

setup_logging(log_level=parse_log_level(LOG_LEVEL), log_file=LOG_FILE)

# Create logger for this module
logger = get_logger(__name__)


def shutdown_handler(sig: int, frame: Any) -> None:
    """Stop on SIGINT or SIGTERM.

    Worker processes of an ensemble receive the signal too; partial outputs
    are left in place and the manifest is not written.

    Args:
        sig: Signal number
        frame: Current stack frame
    """
    signal_name = signal.Signals(sig).name
    logger.info(f"Received shutdown signal {signal_name} ({sig})")
    sys.exit(128 + sig)


if __name__ == "__main__":
    signal.signal(signal.SIGINT, shutdown_handler)
    signal.signal(signal.SIGTERM, shutdown_handler)
    cli(prog_name="main.py")
