"""Configuration settings for the protocol toolkit.

This module loads environment variables and provides configuration settings
for the entire application. Every setting has a default, so a missing ``.env``
file is not an error; malformed numeric values are reported and replaced by
their defaults.
"""

import logging
import math
import os

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load environment variables from .env file
load_dotenv()


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.error(f"Error: '{name}' is not a number ({raw!r}), using {default}")
        return default


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.error(f"Error: '{name}' is not an integer ({raw!r}), using {default}")
        return default


# Logging configuration
LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE: str = os.getenv("LOG_FILE", os.path.join(".", "logs", "protocols.log"))

# Output directory for simulation and sweep results
OUTPUT_DIRECTORY_PATH: str = os.getenv("OUTPUT_DIRECTORY_PATH", "./runs")

# Integrator defaults
REL_TOL: float = _float_env("REL_TOL", 1e-8)
ABS_TOL: float = _float_env("ABS_TOL", 1e-10)
MAX_STEP: float = _float_env("MAX_STEP", math.inf)
BLOWUP_THRESHOLD: float = _float_env("BLOWUP_THRESHOLD", 1e12)
HORIZON: float = _float_env("HORIZON", math.inf)
INTEGRATOR_METHOD: str = os.getenv("INTEGRATOR_METHOD", "LSODA")
MAX_STEPS: int = _int_env("MAX_STEPS", 5_000_000)

# Hybrid execution
MAX_JUMPS: int = _int_env("MAX_JUMPS", 1_000_000)

# Ensembles
WORKERS: int = _int_env("WORKERS", 1)
DEFAULT_SEED: int = _int_env("DEFAULT_SEED", 0)
