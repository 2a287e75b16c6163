"""Configuration module for application settings."""

from src.config.settings import (
    LOG_LEVEL,
    LOG_FILE,
    OUTPUT_DIRECTORY_PATH,
    REL_TOL,
    ABS_TOL,
    MAX_STEP,
    BLOWUP_THRESHOLD,
    HORIZON,
    MAX_JUMPS,
    WORKERS,
    DEFAULT_SEED,
)

__all__ = [
    "LOG_LEVEL",
    "LOG_FILE",
    "OUTPUT_DIRECTORY_PATH",
    "REL_TOL",
    "ABS_TOL",
    "MAX_STEP",
    "BLOWUP_THRESHOLD",
    "HORIZON",
    "MAX_JUMPS",
    "WORKERS",
    "DEFAULT_SEED",
]
