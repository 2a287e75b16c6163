"""Integrator configuration and results.

``FlowConfig`` carries the error-control settings of the adaptive integrator,
``Trajectory`` the accepted steps of one integration with their dense output,
and ``FlowExit`` the outcome of integrations that stop on a condition.
"""

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.integrate import OdeSolution

from src.config import settings


# Steppers accepted for ``FlowConfig.method``; LSODA switches to BDF when stiff.
METHODS = ("LSODA", "RK45", "Radau", "BDF")


@dataclass(frozen=True)
class FlowConfig:
    """Error control and horizon for one integration.

    Attributes:
        rel_tol: Relative local error tolerance
        abs_tol: Absolute local error tolerance
        max_step: Largest step the integrator may take (s)
        blowup_threshold: State norm treated as escape to infinity
        horizon: Time horizon H of the rate equations (s), possibly infinite
        method: scipy stepper, one of ``METHODS``
        max_steps: Accepted steps in one integration before it is abandoned
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    blowup_threshold: float = 1e12
    horizon: float = math.inf
    method: str = "LSODA"
    max_steps: int = 5_000_000

    def __post_init__(self) -> None:
        if not self.rel_tol > 0 or not self.abs_tol > 0:
            raise ValueError("tolerances must be positive")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not self.horizon >= 0:
            raise ValueError("horizon must be >= 0")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @classmethod
    def from_settings(cls) -> "FlowConfig":
        """Build the default configuration from environment settings."""
        return cls(
            rel_tol=settings.REL_TOL,
            abs_tol=settings.ABS_TOL,
            max_step=settings.MAX_STEP,
            blowup_threshold=settings.BLOWUP_THRESHOLD,
            horizon=settings.HORIZON,
            method=settings.INTEGRATOR_METHOD,
            max_steps=settings.MAX_STEPS,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FlowConfig":
        """Inverse of ``to_dict``, as read back from a run manifest."""
        values = dict(data)
        if "max_steps" in values:
            values["max_steps"] = int(values["max_steps"])
        return cls(**values)

    def scaled(self, unit_scale: float) -> "FlowConfig":
        """Express ``abs_tol`` in a unit ``unit_scale`` times mol/L."""
        if unit_scale == 1.0:
            return self
        return replace(self, abs_tol=self.abs_tol * unit_scale)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Trajectory:
    """Accepted integration steps with dense output.

    Attributes:
        times: Step end points, strictly increasing, starting at 0
        states: State after each step, shape (len(times), d)
        solution: Piecewise dense interpolant, None for a zero-length flow
    """

    times: np.ndarray
    states: np.ndarray
    solution: Optional[OdeSolution] = field(default=None, repr=False)
    width: Optional[int] = None

    @classmethod
    def constant(cls, x0: np.ndarray) -> "Trajectory":
        """A trajectory that never left ``x0``."""
        state = np.array(x0, dtype=float)
        return cls(times=np.zeros(1), states=state[np.newaxis, :].copy())

    @classmethod
    def from_steps(
        cls,
        times: List[float],
        states: List[np.ndarray],
        interpolants: list,
        width: Optional[int] = None,
    ) -> "Trajectory":
        """Assemble a trajectory from accepted steps.

        Args:
            times: Step end points including the initial time 0
            states: States at ``times``
            interpolants: One dense-output object per step
            width: Number of leading state coordinates to expose; extra
                coordinates (such as an intensity accumulator) are hidden
        """
        states = [np.asarray(s, dtype=float)[:width] for s in states]
        if len(times) == 1:
            return cls.constant(states[0])
        return cls(
            times=np.asarray(times, dtype=float),
            states=np.vstack(states),
            solution=OdeSolution(times, interpolants),
            width=width,
        )

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1].copy()

    def state_at(self, t: float) -> np.ndarray:
        """Dense-output state at time ``t`` within ``[0, end_time]``."""
        if t < 0 or t > self.end_time:
            raise ValueError(f"time {t} outside trajectory range [0, {self.end_time}]")
        if self.solution is None:
            return self.states[0].copy()
        if t == self.end_time:
            return self.final
        return np.asarray(self.solution(t), dtype=float)[: self.width]

    def sample(self, count: int) -> "Trajectory":
        """Resample on ``count`` equally spaced times (for export)."""
        if self.solution is None or count < 2:
            return self
        grid = np.linspace(0.0, self.end_time, count)
        states = np.vstack([self.state_at(t) for t in grid])
        return Trajectory(
            times=grid, states=states, solution=self.solution, width=self.width
        )


@dataclass
class FlowExit:
    """Result of an integration that stops on a guard or accumulator level.

    Attributes:
        time: Stop time (s); the horizon when nothing fired
        state: State at ``time`` (without the accumulator coordinate)
        cause: ``"guard"``, ``"level"`` or ``"horizon"``
        accumulated: Value of the intensity integral at ``time``
        trajectory: The flow up to ``time``
    """

    time: float
    state: np.ndarray
    cause: str
    accumulated: float = 0.0
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def hit(self) -> bool:
        return self.cause != "horizon"
