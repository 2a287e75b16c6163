"""Data models for statistical model checking.

``Predicate`` decides a single protocol outcome, ``Estimate`` summarises an
ensemble of outcomes, and ``SweepGrid`` holds one estimate per point of a
rectangular parameter grid.
"""

import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Dict, List, Optional, Tuple

from src.models.crn import Crn
from src.models.quantity import to_decimal
from src.models.sample import EvalResult
from src.utils.errors import HoleError, PredicateError


@dataclass(frozen=True)
class Predicate:
    """``species in [lo, hi]`` evaluated on the final sample or an observation.

    Attributes:
        species: Species name
        lo: Lower bound (mol/L), inclusive
        hi: Upper bound (mol/L), inclusive, possibly infinite
        at: Observation identifier, or None for the final sample
    """

    species: str
    lo: float
    hi: float
    at: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    def value(self, result: EvalResult, crn: Crn) -> float:
        """The concentration the predicate looks at.

        Raises:
            PredicateError: Unknown species, or no observation with the identifier
        """
        try:
            index = crn.index_of(self.species)
        except KeyError:
            raise PredicateError(f"predicate refers to unknown species {self.species!r}") from None
        if self.at is None:
            return result.sample.conc[index]
        observation = result.observation(self.at)
        if observation is None:
            raise PredicateError(f"no observation with identifier {self.at}")
        return observation.conc[index]

    def holds(self, result: EvalResult, crn: Crn) -> bool:
        return self.lo <= self.value(result, crn) <= self.hi

    def describe(self, crn: Optional[Crn] = None) -> str:
        scale = crn.unit_scale if crn is not None else 1.0
        unit = crn.concentration_unit if crn is not None else "M"
        where = "final" if self.at is None else f"obs:{self.at}"
        return f"{self.species} in [{self.lo / scale!r}, {self.hi / scale!r}] {unit} at {where}"


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate of a satisfaction probability.

    Attributes:
        p_hat: Fraction of runs satisfying the predicate
        n: Number of runs that completed
        successes: Runs satisfying the predicate
        ci_lo: Lower end of the exact confidence interval
        ci_hi: Upper end of the exact confidence interval
        delta: One minus the confidence level
        seed: Root seed of the ensemble
        failed: Runs skipped because their evaluation raised
    """

    p_hat: float
    n: int
    successes: int
    ci_lo: float
    ci_hi: float
    delta: float
    seed: int
    failed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.ci_lo <= self.ci_hi <= 1.0:
            raise ValueError(f"confidence interval [{self.ci_lo}, {self.ci_hi}] not within [0, 1]")
        if self.n > 0 and not self.ci_lo <= self.p_hat <= self.ci_hi:
            raise ValueError(f"p_hat {self.p_hat} outside [{self.ci_lo}, {self.ci_hi}]")

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "n": self.n,
            "successes": self.successes,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "delta": self.delta,
            "seed": self.seed,
            "failed": self.failed,
        }


@dataclass(frozen=True)
class Axis:
    """One sweep parameter with its grid values.

    Attributes:
        name: Template parameter name
        values: Grid values in increasing order
    """

    name: str
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError(f"axis {self.name!r} has no values")

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """Parse ``name=lo:hi:steps``; values are evenly spaced, ends included.

        Raises:
            HoleError: On malformed text
        """
        name, sep, rest = text.partition("=")
        parts = rest.split(":")
        if not sep or not name.strip() or len(parts) != 3:
            raise HoleError(f"axis must look like name=lo:hi:steps, got {text!r}")
        try:
            lo, hi = to_decimal(parts[0].strip()), to_decimal(parts[1].strip())
            steps = int(parts[2])
        except ValueError:
            raise HoleError(f"axis must look like name=lo:hi:steps, got {text!r}") from None
        if steps < 1 or not lo.is_finite() or not hi.is_finite() or hi < lo:
            raise HoleError(f"axis {name.strip()!r} needs lo <= hi and steps >= 1")
        if steps == 1:
            values = [lo]
        else:
            width = (hi - lo) / Decimal(steps - 1)
            values = [lo + width * i for i in range(steps)]
        return cls(name.strip(), tuple(float(v) for v in values))

    def __str__(self) -> str:
        return f"{self.name}={self.values[0]!r}:{self.values[-1]!r}:{len(self.values)}"


@dataclass(frozen=True)
class SweepCell:
    """One grid point.

    Attributes:
        index: Position in row-major order
        params: Parameter values of the cell
        estimate: The cell's estimate, None when the cell failed
        error: Failure message of a failed cell
    """

    index: int
    params: Tuple[Tuple[str, float], ...]
    estimate: Optional[Estimate] = None
    error: Optional[str] = None

    @property
    def param_dict(self) -> Dict[str, float]:
        return dict(self.params)


@dataclass(frozen=True)
class SweepGrid:
    """Estimates over a rectangular grid.

    Attributes:
        axes: Sweep axes; the last axis varies fastest
        cells: One cell per grid point in row-major order
        n: Runs per cell
        delta: One minus the confidence level, shared by all cells
        seed: Root seed
    """

    axes: Tuple[Axis, ...]
    cells: Tuple[SweepCell, ...] = field(repr=False)
    n: int
    delta: float
    seed: int

    def __post_init__(self) -> None:
        expected = math.prod(len(axis.values) for axis in self.axes)
        if len(self.cells) != expected:
            raise ValueError(f"grid has {len(self.cells)} cells, expected {expected}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(axis.values) for axis in self.axes)

    @property
    def names(self) -> List[str]:
        return [axis.name for axis in self.axes]

    def argmax(self) -> List[SweepCell]:
        """Cells whose interval reaches the best cell's lower bound.

        These are the cells that cannot be told apart from the best estimate at
        the grid's confidence level.
        """
        scored = [cell for cell in self.cells if cell.estimate is not None]
        if not scored:
            return []
        best = max(scored, key=lambda cell: (cell.estimate.p_hat, -cell.index))
        return [cell for cell in scored if cell.estimate.ci_hi >= best.estimate.ci_lo]

    def to_dict(self) -> dict:
        return {
            "axes": [{"name": a.name, "values": list(a.values)} for a in self.axes],
            "n": self.n,
            "delta": self.delta,
            "seed": self.seed,
            "cells": [
                {
                    "index": cell.index,
                    "params": cell.param_dict,
                    "estimate": cell.estimate.to_dict() if cell.estimate else None,
                    "error": cell.error,
                }
                for cell in self.cells
            ],
        }
