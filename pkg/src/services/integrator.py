"""Adaptive integration of autonomous ODEs with event location.

All entry points drive a scipy stepper (``LSODA`` unless configured otherwise)
one accepted step at a time. Each step's dense output is used to locate guard
crossings (bisection on the predicate) and accumulator levels (Brent's method),
and every accepted state is checked for escape to infinity. A step budget
bounds every integration, including flows that wait forever for a guard.
"""

import math
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
from scipy.integrate import BDF, LSODA, RK45, Radau
from scipy.optimize import brentq

from src.models.flow import FlowConfig, FlowExit, Trajectory
from src.services.kinetics import NEGATIVE_TOLERANCE
from src.utils.errors import IllPosedError, StructuralError
from src.utils.logging import get_logger

logger = get_logger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]
ScalarField = Callable[[np.ndarray], float]
Guard = Callable[[np.ndarray], bool]

# Interior points of every step at which a guard is evaluated.
GUARD_POINTS = 8

SOLVERS = {"LSODA": LSODA, "RK45": RK45, "Radau": Radau, "BDF": BDF}


def time_tolerance(t: float) -> float:
    return 1e-9 * max(1.0, abs(t))


def _steps(
    fun: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_end: float,
    cfg: FlowConfig,
    monitored: int,
    nonnegative: bool,
) -> Iterator[Tuple[float, float, np.ndarray, object]]:
    """Yield ``(t_old, t_new, y_new, dense)`` for each accepted step.

    With ``nonnegative`` the vector field sees round-off negatives projected
    onto zero, and so does every yielded state. The stepper's own state is
    never written to.

    Args:
        fun: Right-hand side ``f(t, y)``
        y0: Initial state
        t_end: Final time, possibly infinite
        cfg: Error control settings, stepper and step budget
        monitored: Leading coordinates checked for blowup and sign
        nonnegative: Treat the monitored coordinates as concentrations

    Raises:
        IllPosedError: On blowup, step size underflow or an exhausted step budget
        StructuralError: On a negative concentration beyond round-off
    """
    tolerance = max(NEGATIVE_TOLERANCE, 100.0 * cfg.abs_tol)
    rhs = fun
    if nonnegative:

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            head = y[:monitored]
            if head.size and head.min() < 0.0:
                y = y.copy()
                y[:monitored] = np.maximum(head, 0.0)
            return fun(t, y)

    solver = SOLVERS[cfg.method](
        rhs,
        0.0,
        y0,
        t_end,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
    )
    taken = 0
    while solver.status == "running":
        if taken >= cfg.max_steps:
            raise IllPosedError(
                f"no end after {cfg.max_steps} steps at t={solver.t:.6g} s; "
                f"the flow does not stop within the step budget"
            )
        message = solver.step()
        taken += 1
        if solver.status == "failed":
            raise IllPosedError(
                f"step size underflow at t={solver.t:.6g} s ({message}); "
                f"the solution is not defined over the requested horizon"
            )
        y = np.array(solver.y, dtype=float)
        head = y[:monitored]
        if not np.all(np.isfinite(y)) or np.linalg.norm(head) > cfg.blowup_threshold:
            raise IllPosedError(
                f"state norm exceeded {cfg.blowup_threshold:g} at t={solver.t:.6g} s; "
                f"the solution escapes in finite time"
            )
        if nonnegative and head.size and head.min() < 0.0:
            if head.min() < -tolerance:
                raise StructuralError(
                    f"concentration {head.min():.3e} below zero at t={solver.t:.6g} s; "
                    f"tighten the integrator tolerances"
                )
            head[:] = np.maximum(head, 0.0)
        yield solver.t_old, solver.t, y, solver.dense_output()


def integrate(
    drift: VectorField,
    x0: np.ndarray,
    t: float,
    cfg: FlowConfig,
    nonnegative: bool = False,
) -> Trajectory:
    """Solve ``x' = drift(x)`` on ``[0, t]``.

    Args:
        drift: Autonomous vector field
        x0: Initial state
        t: Duration (s)
        cfg: Error control and horizon
        nonnegative: Treat the state as concentrations (clamp round-off)

    Returns:
        Trajectory: Accepted steps with dense output

    Raises:
        IllPosedError: On blowup, step underflow, an exhausted step budget or
            ``t`` beyond the horizon
    """
    x0 = np.array(x0, dtype=float)
    if t < 0:
        raise ValueError(f"integration time must be >= 0, got {t}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    if t > cfg.horizon:
        raise IllPosedError(f"duration {t:g} s exceeds the horizon {cfg.horizon:g} s")
    if t == 0:
        return Trajectory.constant(x0)

    times: List[float] = [0.0]
    states: List[np.ndarray] = [x0]
    interpolants: list = []
    for _, t_new, y, dense in _steps(
        lambda _t, y: drift(y), x0, t, cfg, x0.size, nonnegative
    ):
        times.append(t_new)
        states.append(y)
        interpolants.append(dense)
    logger.debug(f"Integrated {t:g} s in {len(interpolants)} steps")
    return Trajectory.from_steps(times, states, interpolants)


def _first_guard_time(
    guard: Guard, dense, t_old: float, t_new: float, y_new: np.ndarray, width: int
) -> Optional[float]:
    """Earliest time in ``(t_old, t_new]`` where the guard holds, or None."""
    points = np.linspace(t_old, t_new, GUARD_POINTS + 2)[1:]
    previous = t_old
    for point in points:
        state = y_new[:width] if point == t_new else dense(point)[:width]
        if guard(state):
            lo, hi = previous, point
            while hi - lo > time_tolerance(hi):
                mid = 0.5 * (lo + hi)
                if guard(dense(mid)[:width]):
                    hi = mid
                else:
                    lo = mid
            return hi
        previous = point
    return None


def _level_time(
    dense, t_old: float, t_new: float, y_new: np.ndarray, stop_level: float
) -> Optional[float]:
    """Time in ``(t_old, t_new]`` where the accumulator reaches the level."""
    if y_new[-1] < stop_level:
        return None
    if y_new[-1] == stop_level:
        return t_new
    root = brentq(
        lambda s: dense(s)[-1] - stop_level,
        t_old,
        t_new,
        xtol=time_tolerance(t_new) * 1e-3,
    )
    return float(root)


def flow_until(
    drift: VectorField,
    x0: np.ndarray,
    cfg: FlowConfig,
    t_max: Optional[float] = None,
    guard: Optional[Guard] = None,
    aux_drift: Optional[ScalarField] = None,
    stop_level: float = math.inf,
    nonnegative: bool = False,
) -> FlowExit:
    """Flow until a guard fires, an accumulated integral reaches a level, or the horizon.

    The accumulator integrates ``aux_drift`` along the flow. A guard crossing
    and a level crossing in the same step are resolved in favour of the earlier
    one; ties go to the guard.

    Args:
        drift: Autonomous vector field
        x0: Initial state
        cfg: Error control settings; ``cfg.horizon`` caps ``t_max``
        t_max: Latest stop time; defaults to the horizon
        guard: State predicate; the flow stops at its first true instant
        aux_drift: Non-negative scalar field to accumulate
        stop_level: Accumulator level that stops the flow
        nonnegative: Treat the state as concentrations

    Returns:
        FlowExit: Stop time, state, cause and accumulated value

    Raises:
        IllPosedError: On blowup, step underflow, or when ``cfg.max_steps``
            steps pass without a stop
        ValueError: If the flow could run forever: no finite ``t_max`` or
            horizon, and neither a guard nor a finite ``stop_level``
    """
    x0 = np.array(x0, dtype=float)
    width = x0.size
    limit = cfg.horizon if t_max is None else min(t_max, cfg.horizon)
    if not math.isfinite(limit) and guard is None and not math.isfinite(stop_level):
        raise ValueError("flow_until needs a finite t_max, a guard or a finite stop_level")
    if limit < 0:
        raise ValueError(f"t_max must be >= 0, got {limit}")

    if guard is not None and guard(x0):
        return FlowExit(0.0, x0, "guard", 0.0, Trajectory.constant(x0))
    if stop_level <= 0.0:
        return FlowExit(0.0, x0, "level", 0.0, Trajectory.constant(x0))
    if limit == 0.0:
        return FlowExit(0.0, x0, "horizon", 0.0, Trajectory.constant(x0))

    # The last coordinate carries the accumulator (identically zero without one).
    def fun(_t: float, y: np.ndarray) -> np.ndarray:
        rate = 0.0 if aux_drift is None else aux_drift(y[:width])
        return np.append(drift(y[:width]), rate)

    y0 = np.append(x0, 0.0)
    times: List[float] = [0.0]
    states: List[np.ndarray] = [y0]
    interpolants: list = []

    for t_old, t_new, y_new, dense in _steps(fun, y0, limit, cfg, width, nonnegative):
        t_guard = (
            _first_guard_time(guard, dense, t_old, t_new, y_new, width)
            if guard is not None
            else None
        )
        t_level = (
            _level_time(dense, t_old, t_new, y_new, stop_level)
            if aux_drift is not None and math.isfinite(stop_level)
            else None
        )
        candidates = [(t, cause) for t, cause in ((t_guard, "guard"), (t_level, "level")) if t is not None]
        if candidates:
            t_stop, cause = min(candidates, key=lambda item: (item[0], item[1] != "guard"))
            y_stop = y_new if t_stop == t_new else np.asarray(dense(t_stop), dtype=float)
            times.append(t_stop)
            states.append(y_stop)
            interpolants.append(dense)
            trajectory = Trajectory.from_steps(times, states, interpolants, width)
            return FlowExit(t_stop, y_stop[:width].copy(), cause, float(y_stop[-1]), trajectory)
        times.append(t_new)
        states.append(y_new)
        interpolants.append(dense)

    trajectory = Trajectory.from_steps(times, states, interpolants, width)
    final = states[-1]
    return FlowExit(float(times[-1]), final[:width].copy(), "horizon", float(final[-1]), trajectory)


def exit_time(
    drift: VectorField,
    x0: np.ndarray,
    guard: Guard,
    cfg: FlowConfig,
    t_max: Optional[float] = None,
    nonnegative: bool = False,
) -> FlowExit:
    """First time ``t*`` at which ``guard`` holds along the flow from ``x0``.

    Returns:
        FlowExit: ``cause == "guard"`` with ``t*`` located to within
        ``1e-9 * max(1, t*)``, or ``cause == "horizon"`` when the guard never
        holds before ``min(t_max, cfg.horizon)``
    """
    return flow_until(drift, x0, cfg, t_max=t_max, guard=guard, nonnegative=nonnegative)


def integrate_with_accumulator(
    drift: VectorField,
    x0: np.ndarray,
    aux_drift: ScalarField,
    stop_level: float,
    cfg: FlowConfig,
    t_max: Optional[float] = None,
    nonnegative: bool = False,
) -> FlowExit:
    """First time the integral of ``aux_drift`` along the flow reaches ``stop_level``.

    Returns:
        FlowExit: ``cause == "level"`` at the hitting time, or
        ``cause == "horizon"`` when the level is not reached in time
    """
    return flow_until(
        drift,
        x0,
        cfg,
        t_max=t_max,
        aux_drift=aux_drift,
        stop_level=stop_level,
        nonnegative=nonnegative,
    )
