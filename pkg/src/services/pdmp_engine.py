"""Execution of piecewise deterministic Markov processes.

Jump times are sampled by time rescaling: draw ``E ~ Exp(1)`` and flow until
the integral of the mode's intensity reaches ``E``, unless the guard fires
first. Jump ``j`` of a path draws from ``rng.child(j)``, so a path is fixed by
its stream.
"""

import math
from dataclasses import replace
from typing import List, Optional

import numpy as np

from src.config import settings
from src.models.flow import FlowConfig, Trajectory
from src.models.pdmp import HybridPath, Mode, Pdmp, Segment
from src.services.integrator import flow_until
from src.utils.errors import ZenoError
from src.utils.logging import get_logger
from src.utils.random_stream import RandomStream

logger = get_logger(__name__)


def _choose_target(mode: Mode, x: np.ndarray, rng: RandomStream) -> int:
    targets = list(mode.intensities)
    if len(targets) == 1:
        return targets[0]
    weights = np.array([mode.intensities[q](x) for q in targets], dtype=float)
    u = rng.uniform() * weights.sum()
    return targets[int(np.searchsorted(np.cumsum(weights), u))]


def execute(
    pdmp: Pdmp,
    q0: int,
    x0: np.ndarray,
    horizon: float,
    rng: RandomStream,
    cfg: Optional[FlowConfig] = None,
    max_jumps: Optional[int] = None,
) -> HybridPath:
    """Sample one path of ``pdmp`` from ``(q0, x0)`` up to ``horizon``.

    An absorbing mode ends the path with a segment reaching the horizon.

    Args:
        pdmp: The process
        q0: Initial mode
        x0: Initial continuous state
        horizon: Time horizon (s); may be infinite if every path is absorbed
        rng: Stream of this path
        cfg: Integrator settings
        max_jumps: Jump cap; defaults to the ``MAX_JUMPS`` setting

    Returns:
        HybridPath: The sampled path

    Raises:
        ZenoError: If the path jumps more than ``max_jumps`` times
        IllPosedError: If a flow cannot be integrated
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    x = np.array(x0, dtype=float)
    if x.shape != (pdmp.dimension,):
        raise ValueError(f"initial state has shape {x.shape}, expected ({pdmp.dimension},)")
    cfg = cfg or FlowConfig()
    max_jumps = settings.MAX_JUMPS if max_jumps is None else max_jumps
    flow_cfg = replace(cfg, horizon=math.inf)

    q, t = q0, 0.0
    segments: List[Segment] = []
    while True:
        mode = pdmp.mode(q)
        if mode.absorbing or t >= horizon:
            segments.append(Segment(q, t, x, horizon, x, "horizon", Trajectory.constant(x)))
            break
        stream = rng.child(len(segments))
        level = stream.exponential() if mode.has_intensity else math.inf
        outcome = flow_until(
            mode.field,
            x,
            flow_cfg,
            t_max=horizon - t,
            guard=mode.guard,
            aux_drift=mode.rate if mode.has_intensity else None,
            stop_level=level,
            nonnegative=pdmp.nonnegative,
        )
        t_exit = t + outcome.time
        if outcome.cause == "horizon":
            segments.append(
                Segment(q, t, x, t_exit, outcome.state, "horizon", outcome.trajectory)
            )
            break
        cause = "guard" if outcome.cause == "guard" else "jump"
        target = None if cause == "guard" else _choose_target(mode, outcome.state, stream)
        segments.append(Segment(q, t, x, t_exit, outcome.state, cause, outcome.trajectory))
        if len(segments) > max_jumps:
            raise ZenoError(
                f"more than {max_jumps} jumps before t={t_exit:.6g} s, last in mode {q} ({mode.kind})"
            )
        q, x = pdmp.reset(q, outcome.state.copy(), cause, target, stream)
        x = np.array(x, dtype=float)
        t = t_exit

    logger.debug(f"PDMP path: {len(segments)} segments, final mode {q}")
    return HybridPath(tuple(segments))


def survival(
    pdmp: Pdmp, q: int, x: np.ndarray, t: float, cfg: Optional[FlowConfig] = None
) -> float:
    """Probability of staying in mode ``q`` from ``x`` for ``t`` seconds.

    Zero once the guard has fired along the flow.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    mode = pdmp.mode(q)
    if mode.guard is not None and mode.guard(np.asarray(x, dtype=float)):
        return 0.0
    if mode.absorbing or t == 0:
        return 1.0
    cfg = cfg or FlowConfig()
    outcome = flow_until(
        mode.field,
        x,
        replace(cfg, horizon=math.inf),
        t_max=t,
        guard=mode.guard,
        aux_drift=mode.rate if mode.has_intensity else None,
        nonnegative=pdmp.nonnegative,
    )
    if outcome.cause == "guard":
        return 0.0
    return math.exp(-outcome.accumulated)
