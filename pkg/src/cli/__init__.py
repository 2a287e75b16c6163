"""Command line entry points."""

from src.cli.commands import cli

__all__ = ["cli"]
