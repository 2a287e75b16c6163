"""Values denoted by protocols.

A ``Sample`` is a concentration vector with a volume and a temperature. The
evaluators return an ``EvalResult``: the sample together with the
observations recorded while producing it and the time that elapsed.
"""

import math
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Sample:
    """A physical sample.

    Attributes:
        conc: Concentrations (mol/L), ordered like the network's species
        volume: Volume (L)
        temperature: Temperature (K)
    """

    conc: Tuple[float, ...]
    volume: float
    temperature: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "conc", tuple(float(c) for c in self.conc))
        object.__setattr__(self, "volume", float(self.volume))
        object.__setattr__(self, "temperature", float(self.temperature))
        if any(not math.isfinite(c) or c < 0 for c in self.conc):
            raise ValueError(f"concentrations must be finite and >= 0: {self.conc}")
        if not math.isfinite(self.volume) or self.volume < 0:
            raise ValueError(f"volume must be finite and >= 0, got {self.volume}")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature}")

    @classmethod
    def empty(cls, size: int) -> "Sample":
        """The disposed sample: no content, no volume, 0 K."""
        return cls((0.0,) * size, 0.0, 0.0)

    @property
    def size(self) -> int:
        return len(self.conc)

    def moles(self) -> np.ndarray:
        """Amount of each species (mol)."""
        return np.asarray(self.conc, dtype=float) * self.volume

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        names = names or [f"s{i}" for i in range(self.size)]
        return {
            "conc_M": dict(zip(names, self.conc)),
            "volume_L": self.volume,
            "temperature_K": self.temperature,
        }


@dataclass(frozen=True)
class Observation:
    """A recorded concentration vector.

    Attributes:
        conc: Observed concentrations (mol/L)
        idn: Identifier given in the protocol; may repeat
        time: Elapsed protocol time when recorded (s)
    """

    conc: Tuple[float, ...]
    idn: int
    time: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "conc", tuple(float(c) for c in self.conc))
        object.__setattr__(self, "time", float(self.time))
        if self.time < 0:
            raise ValueError(f"observation time must be >= 0, got {self.time}")

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        names = names or [f"s{i}" for i in range(len(self.conc))]
        return {"idn": self.idn, "time_s": self.time, "conc_M": dict(zip(names, self.conc))}


@dataclass(frozen=True)
class EvalResult:
    """Outcome of evaluating a protocol.

    Attributes:
        sample: The resulting sample
        observations: Observations in evaluation order (left operand first)
        elapsed: Protocol time spent (s)
    """

    sample: Sample
    observations: Tuple[Observation, ...] = ()
    elapsed: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "elapsed", float(self.elapsed))
        if self.elapsed < 0:
            raise ValueError(f"elapsed time must be >= 0, got {self.elapsed}")
        for obs in self.observations:
            if obs.time > self.elapsed:
                raise ValueError(
                    f"observation {obs.idn} at {obs.time} s is later than the elapsed time {self.elapsed} s"
                )

    def observation(self, idn: int) -> Optional[Observation]:
        """The last observation carrying ``idn``, if any."""
        for obs in reversed(self.observations):
            if obs.idn == idn:
                return obs
        return None

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        return {
            "sample": self.sample.to_dict(names),
            "observations": [obs.to_dict(names) for obs in self.observations],
            "elapsed_s": self.elapsed,
        }


# Environments map sample variables to the results bound to them.
Env = Mapping[str, EvalResult]


@dataclass
class TraceRecord:
    """Dense trajectory of one equilibration, kept for export.

    Attributes:
        node_id: Id of the Equilibrate node
        start: Elapsed protocol time when the equilibration began (s)
        times: Times relative to ``start`` (s)
        states: Concentrations at ``times`` (mol/L), one row per time
    """

    node_id: Optional[int]
    start: float
    times: np.ndarray
    states: np.ndarray = field(repr=False)


TraceLog = List[TraceRecord]
