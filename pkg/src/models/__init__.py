"""Data models for the application."""

from src.models.crn import Crn, Reaction, Species
from src.models.flow import FlowConfig, FlowExit, Trajectory
from src.models.noise import NoiseConfig
from src.models.pdmp import HybridPath, Mode, Pdmp, Segment
from src.models.protocol import Protocol, SourceSpan
from src.models.sample import EvalResult, Observation, Sample, TraceRecord
from src.models.smc import Axis, Estimate, Predicate, SweepCell, SweepGrid

__all__ = [
    "Axis",
    "Crn",
    "Estimate",
    "EvalResult",
    "FlowConfig",
    "FlowExit",
    "HybridPath",
    "Mode",
    "NoiseConfig",
    "Observation",
    "Pdmp",
    "Predicate",
    "Protocol",
    "Reaction",
    "Sample",
    "Segment",
    "SourceSpan",
    "Species",
    "SweepCell",
    "SweepGrid",
    "TraceRecord",
    "Trajectory",
]
