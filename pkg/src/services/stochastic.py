"""Stochastic semantics of protocols.

Dispense fractions follow a truncated Gaussian around the nominal fraction,
equilibration times are exponential with the nominal time as mean, and rate
constants may be redrawn once per run. All draws come from ``RandomStream``
children keyed by the AST node id, so a run is fixed by its stream alone.

Stream layout for one run stream ``r``: ``r.child(0)`` perturbs the rates,
``r.child(1 + node_id)`` serves the node with that pre-order id.
"""

import math
from typing import Optional

import numpy as np

from src.models.crn import Crn
from src.models.flow import FlowConfig
from src.models.noise import MAX_ATTEMPTS, NoiseConfig
from src.models.protocol import Equilibrate, LetDispense, Observe, Protocol
from src.models.sample import Env, EvalResult, TraceLog
from src.services.deterministic import ProtocolEvaluator, require_closed_linear
from src.services.syntax import is_numbered, number_nodes
from src.utils.errors import (
    NonpositiveEquilibrateTimeError,
    TruncationTooTightError,
)
from src.utils.logging import get_logger
from src.utils.random_stream import RandomStream

logger = get_logger(__name__)

RATES_STREAM = 0


def node_stream(run: RandomStream, node_id: Optional[int]) -> RandomStream:
    """The stream serving the node ``node_id`` within a run."""
    if node_id is None:
        raise ValueError("stochastic evaluation needs numbered protocol nodes")
    return run.child(1 + node_id)


def _truncated_normal(
    mean: float, sigma: float, lo: float, hi: float, rng: RandomStream, what: str
) -> float:
    for _ in range(MAX_ATTEMPTS):
        value = rng.normal(mean, sigma)
        if lo < value < hi:
            return value
    raise TruncationTooTightError(
        f"{what}: no draw from Normal({mean:g}, {sigma:g}) fell in ({lo:g}, {hi:g}) "
        f"after {MAX_ATTEMPTS} attempts"
    )


def sample_dispense_fraction(
    cfg: NoiseConfig, volume: float, p: float, rng: RandomStream
) -> float:
    """Draw the realised fraction of a dispense.

    Args:
        cfg: Noise configuration; only ``cfg.dispense`` is used
        volume: Volume of the sample being split (L)
        p: Nominal fraction in (0, 1)
        rng: Stream of the dispense node

    Returns:
        float: ``p`` itself when the deviation is zero, otherwise a draw
        strictly inside the truncation bounds

    Raises:
        TruncationTooTightError: If rejection sampling fails
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"dispense fraction must be in (0, 1), got {p}")
    sigma = cfg.dispense.sigma(volume)
    if sigma == 0.0:
        return p
    lo, hi = cfg.dispense.bounds
    return _truncated_normal(p, sigma, lo, hi, rng, "dispense fraction")


def sample_equilibrate_time(t: float, rng: RandomStream) -> float:
    """Exponential equilibration time with mean ``t``, by inverse transform.

    Raises:
        NonpositiveEquilibrateTimeError: If ``t <= 0``
    """
    if not t > 0.0:
        raise NonpositiveEquilibrateTimeError(
            f"exponential equilibration needs a duration > 0, got {t} s"
        )
    return -t * math.log(rng.uniform())


def perturb_rates(crn: Crn, cfg: NoiseConfig, rng: RandomStream) -> Crn:
    """Redraw every rate constant, truncated to positive values.

    Returns ``crn`` itself when rate noise is off.

    Raises:
        TruncationTooTightError: If a positive draw cannot be obtained
    """
    if cfg.rates.kind == "none" or not crn.reactions:
        return crn
    rates = [r.rate for r in crn.reactions]
    sigmas = cfg.rates.sigmas(rates, [crn.rate_factor(r) for r in crn.reactions])
    drawn = [
        k if sigma == 0.0 else _truncated_normal(k, sigma, 0.0, math.inf, rng, f"rate of reaction {i}")
        for i, (k, sigma) in enumerate(zip(rates, sigmas))
    ]
    return crn.with_rates(drawn)


def noisy_observation(cfg: NoiseConfig, conc: tuple, rng: RandomStream) -> tuple:
    """Add the configured measurement noise to observed concentrations."""
    noise = cfg.observe_noise
    if noise.kind == "none" or noise.sigma == 0.0:
        return conc
    values = np.asarray(conc) + rng.generator.normal(0.0, noise.sigma, size=len(conc))
    return tuple(np.maximum(values, 0.0))


class StochasticEvaluator(ProtocolEvaluator):
    """Protocol evaluation with sampled fractions, durations and rates.

    Attributes:
        noise: Noise configuration
        run: Stream of the run; node draws come from its children
    """

    def __init__(
        self,
        crn: Crn,
        noise: NoiseConfig,
        run: RandomStream,
        cfg: Optional[FlowConfig] = None,
        trace: Optional[TraceLog] = None,
    ) -> None:
        super().__init__(crn, cfg, trace)
        self.noise = noise
        self.run = run
        self.perturbed = perturb_rates(crn, noise, run.child(RATES_STREAM))

    def network(self) -> Crn:
        return self.perturbed

    def dispense_fraction(self, node: LetDispense, volume: float) -> float:
        return sample_dispense_fraction(
            self.noise, volume, node.fraction, node_stream(self.run, node.node_id)
        )

    def equilibrate_duration(self, node: Equilibrate) -> float:
        if self.noise.equilibrate.kind == "deterministic":
            return node.duration
        return sample_equilibrate_time(node.duration, node_stream(self.run, node.node_id))

    def observed(self, node: Observe, conc: tuple) -> tuple:
        return noisy_observation(self.noise, conc, node_stream(self.run, node.node_id))


def eval_stoch(
    p: Protocol,
    crn: Crn,
    env: Optional[Env] = None,
    cfg: Optional[FlowConfig] = None,
    noise: Optional[NoiseConfig] = None,
    rng: Optional[RandomStream] = None,
    trace: Optional[TraceLog] = None,
) -> EvalResult:
    """Stochastic semantics of a protocol for one run.

    Unnumbered protocols are numbered in pre-order first. With a degenerate
    noise configuration the result equals ``evaluate`` exactly.

    Args:
        p: Linear protocol, closed under ``env``
        crn: Reaction network
        env: Bindings of free sample variables
        cfg: Integrator settings
        noise: Noise configuration; defaults to no noise
        rng: Stream of this run; defaults to seed 0
        trace: Optional list receiving one dense trajectory per equilibration

    Raises:
        LinearityError: If ``p`` is not linear or not closed
        SamplingError: If a draw cannot satisfy its constraints
        IllPosedError: If an equilibration cannot be integrated
    """
    require_closed_linear(p, env)
    if not is_numbered(p):
        p = number_nodes(p)
    evaluator = StochasticEvaluator(
        crn, noise or NoiseConfig(), rng or RandomStream(0), cfg, trace
    )
    return evaluator.evaluate(p, env)
