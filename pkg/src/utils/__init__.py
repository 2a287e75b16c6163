"""Utility functions and helpers."""

from src.utils.logging import get_logger

__all__ = ["get_logger"]
