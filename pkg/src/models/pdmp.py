"""Piecewise deterministic Markov processes.

A ``Pdmp`` is a finite list of modes over one continuous state space. Each
mode flows along its own vector field until its guard fires or a jump is
triggered by the mode's intensities; the reset kernel then samples the next
hybrid state. ``HybridPath`` records one execution segment by segment.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Tuple

import numpy as np

from src.models.flow import Trajectory
from src.utils.random_stream import RandomStream

VectorField = Callable[[np.ndarray], np.ndarray]
ScalarField = Callable[[np.ndarray], float]
Guard = Callable[[np.ndarray], bool]

# reset(mode, state, cause, target, rng) -> (next mode, next state).
# ``target`` is the mode chosen by the intensities for a jump, None for a guard.
ResetKernel = Callable[[int, np.ndarray, str, Optional[int], RandomStream], Tuple[int, np.ndarray]]

EXIT_CAUSES = ("guard", "jump", "horizon")


@dataclass(frozen=True)
class Mode:
    """One discrete mode.

    Attributes:
        kind: Label shown in paths and exports
        field: Vector field of the mode; None makes the mode absorbing
        guard: Forced-jump predicate
        intensities: Jump intensity towards each target mode
    """

    kind: str
    field: Optional[VectorField] = None
    guard: Optional[Guard] = None
    intensities: Mapping[int, ScalarField] = dataclasses.field(default_factory=dict)

    @property
    def absorbing(self) -> bool:
        return self.field is None

    @property
    def has_intensity(self) -> bool:
        return bool(self.intensities)

    def rate(self, x: np.ndarray) -> float:
        """Total jump intensity out of the mode at ``x``."""
        return float(sum(fn(x) for fn in self.intensities.values()))


@dataclass(frozen=True)
class Pdmp:
    """A piecewise deterministic Markov process.

    Attributes:
        dimension: Size of the continuous state
        modes: Modes, addressed by position
        reset: Reset kernel sampling the state after a jump
        nonnegative: Treat every coordinate as a concentration-like quantity
    """

    dimension: int
    modes: Tuple[Mode, ...]
    reset: ResetKernel = field(repr=False)
    nonnegative: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if not self.modes:
            raise ValueError("a PDMP needs at least one mode")
        for q, mode in enumerate(self.modes):
            for target in mode.intensities:
                if not 0 <= target < len(self.modes) or target == q:
                    raise ValueError(f"mode {q} has an intensity towards invalid mode {target}")

    def mode(self, q: int) -> Mode:
        if not 0 <= q < len(self.modes):
            raise ValueError(f"no mode {q}; the PDMP has {len(self.modes)} modes")
        return self.modes[q]

    @property
    def kinds(self) -> Tuple[str, ...]:
        return tuple(mode.kind for mode in self.modes)


@dataclass(frozen=True)
class Segment:
    """Stay in one mode.

    Attributes:
        mode: Mode index
        entry_time: Absolute entry time (s)
        entry_state: State on entry, as produced by the reset
        exit_time: Absolute exit time (s)
        exit_state: State reached by the flow at ``exit_time``
        cause: ``guard``, ``jump`` or ``horizon``
        trajectory: Dense flow with times relative to ``entry_time``
    """

    mode: int
    entry_time: float
    entry_state: np.ndarray = field(repr=False)
    exit_time: float
    exit_state: np.ndarray = field(repr=False)
    cause: str
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.cause not in EXIT_CAUSES:
            raise ValueError(f"unknown exit cause {self.cause!r}")
        if self.exit_time < self.entry_time:
            raise ValueError("segment exits before it is entered")


@dataclass(frozen=True)
class HybridPath:
    """One execution of a PDMP."""

    segments: Tuple[Segment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("a path has at least one segment")
        for before, after in zip(self.segments, self.segments[1:]):
            if after.entry_time != before.exit_time:
                raise ValueError("segments are not contiguous in time")

    @property
    def jumps(self) -> int:
        return sum(1 for s in self.segments if s.cause != "horizon")

    @property
    def final_mode(self) -> int:
        return self.segments[-1].mode

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].exit_state

    def jump_times(self) -> np.ndarray:
        return np.array([s.exit_time for s in self.segments if s.cause != "horizon"])

    def to_rows(self, kinds: Optional[Tuple[str, ...]] = None) -> list:
        """Segment table for export."""
        return [
            {
                "segment": i,
                "mode": s.mode,
                "kind": kinds[s.mode] if kinds else "",
                "entry_time_s": s.entry_time,
                "exit_time_s": s.exit_time,
                "cause": s.cause,
            }
            for i, s in enumerate(self.segments)
        ]
