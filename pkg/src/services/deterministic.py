"""Deterministic semantics of protocols.

``ProtocolEvaluator`` walks a protocol and returns the final sample, the
observations recorded on the way and the elapsed protocol time. The places
where the stochastic semantics differs (dispense fractions, equilibration
times, observations and the network's rates) are methods that
``StochasticEvaluator`` overrides.
"""

from typing import Dict, Optional

import numpy as np

from src.models.crn import Crn
from src.models.flow import FlowConfig
from src.models.protocol import (
    Dispose,
    Equilibrate,
    Initial,
    Let,
    LetDispense,
    Mix,
    Observe,
    Protocol,
    Var,
)
from src.models.sample import Env, EvalResult, Observation, Sample, TraceLog, TraceRecord
from src.services import kinetics
from src.services.integrator import integrate
from src.services.syntax import check_linear
from src.utils.errors import LinearityError, StructuralError, UnboundVariableError
from src.utils.logging import get_logger

logger = get_logger(__name__)


def mix_samples(left: Sample, right: Sample) -> Sample:
    """Volume-weighted mixture of two samples.

    Mixing with an empty sample returns the other sample unchanged; mixing two
    empty samples gives the empty sample.
    """
    if left.volume == 0.0 and right.volume == 0.0:
        logger.warning("Mixing two samples of zero volume; the result is empty")
        return Sample.empty(left.size)
    if left.volume == 0.0:
        return right
    if right.volume == 0.0:
        return left
    volume = left.volume + right.volume
    conc = (
        np.asarray(left.conc) * left.volume + np.asarray(right.conc) * right.volume
    ) / volume
    temperature = (left.temperature * left.volume + right.temperature * right.volume) / volume
    return Sample(tuple(conc), volume, temperature)


def split_sample(sample: Sample, fraction: float) -> tuple:
    """Split ``sample`` into shares ``fraction`` and ``1 - fraction`` of its volume.

    The larger share is a product and the smaller one the difference, which is
    exact when subtracting at least half the volume, so the two shares add up
    to ``sample.volume`` bit for bit and both stay positive for a fraction
    strictly inside (0, 1).
    """
    volume = sample.volume
    if fraction >= 0.5:
        first = volume * fraction
        second = volume - first
    else:
        second = volume * (1.0 - fraction)
        first = volume - second
    return (
        Sample(sample.conc, first, sample.temperature),
        Sample(sample.conc, second, sample.temperature),
    )


class ProtocolEvaluator:
    """Evaluates protocols over one reaction network.

    Attributes:
        crn: Network whose rate equations drive every equilibration
        cfg: Integrator settings
        trace: When not None, a dense trajectory of each equilibration is
            appended to it
    """

    def __init__(
        self, crn: Crn, cfg: Optional[FlowConfig] = None, trace: Optional[TraceLog] = None
    ) -> None:
        self.crn = crn
        self.cfg = cfg or FlowConfig()
        self.trace = trace

    # semantic choices

    def network(self) -> Crn:
        return self.crn

    def dispense_fraction(self, node: LetDispense, volume: float) -> float:
        return node.fraction

    def equilibrate_duration(self, node: Equilibrate) -> float:
        return node.duration

    def observed(self, node: Observe, conc: tuple) -> tuple:
        return conc

    # recursion

    def evaluate(self, p: Protocol, env: Optional[Env] = None) -> EvalResult:
        """Evaluate ``p`` under ``env``.

        Raises:
            UnboundVariableError: If a variable has no binding
            StructuralError: If a sample literal does not fit the network
            IllPosedError: If an equilibration cannot be integrated
        """
        env = dict(env or {})
        match p:
            case Var(name=name):
                if name not in env:
                    raise UnboundVariableError(f"sample variable {name!r} is not bound")
                return env[name]
            case Initial(conc=conc, volume=volume, temperature=temperature):
                if len(conc) != self.crn.size:
                    raise StructuralError(
                        f"sample has {len(conc)} concentrations, the network has {self.crn.size} species"
                    )
                return EvalResult(Sample(conc, volume, temperature))
            case Mix(left=left, right=right):
                first = self.evaluate(left, env)
                second = self.evaluate(right, env)
                return EvalResult(
                    mix_samples(first.sample, second.sample),
                    first.observations + second.observations,
                    max(first.elapsed, second.elapsed),
                )
            case Let(name=name, bound=bound, body=body):
                return self.evaluate(body, {**env, name: self.evaluate(bound, env)})
            case LetDispense(left=x, right=y, source=source, body=body):
                result = self.evaluate(source, env)
                fraction = self.dispense_fraction(p, result.sample.volume)
                kept, rest = split_sample(result.sample, fraction)
                inner: Dict[str, EvalResult] = {
                    **env,
                    x: EvalResult(kept, result.observations, result.elapsed),
                }
                if y is not None:
                    inner[y] = EvalResult(rest, (), result.elapsed)
                return self.evaluate(body, inner)
            case Equilibrate(sample=inner_p):
                result = self.evaluate(inner_p, env)
                duration = self.equilibrate_duration(p)
                return EvalResult(
                    self.equilibrate(result.sample, duration, p, result.elapsed),
                    result.observations,
                    result.elapsed + duration,
                )
            case Dispose(sample=inner_p):
                result = self.evaluate(inner_p, env)
                return EvalResult(Sample.empty(self.crn.size), result.observations, result.elapsed)
            case Observe(sample=inner_p, idn=idn):
                result = self.evaluate(inner_p, env)
                observation = Observation(
                    self.observed(p, result.sample.conc), idn, result.elapsed
                )
                return EvalResult(
                    result.sample, result.observations + (observation,), result.elapsed
                )
        raise TypeError(f"not a protocol node: {type(p).__name__}")

    def equilibrate(
        self, sample: Sample, duration: float, node: Equilibrate, start: float
    ) -> Sample:
        """Integrate the rate equations of ``sample`` for ``duration`` seconds."""
        if duration == 0.0 or sample.volume == 0.0:
            return sample
        crn = self.network()

        def field(conc: np.ndarray) -> np.ndarray:
            return kinetics.drift(crn, conc, sample.volume, sample.temperature)

        trajectory = integrate(field, np.asarray(sample.conc), duration, self.cfg, nonnegative=True)
        if self.trace is not None:
            self.trace.append(
                TraceRecord(node.node_id, start, trajectory.times.copy(), trajectory.states.copy())
            )
        final = kinetics.clamp_concentrations(trajectory.final)
        return Sample(tuple(final), sample.volume, sample.temperature)


def require_closed_linear(p: Protocol, env: Optional[Env] = None) -> None:
    """Raise unless ``p`` is linear and its free variables are bound in ``env``."""
    bound = set(env or {})
    violations = [
        v for v in check_linear(p) if v.kind != "unbound" or v.name not in bound
    ]
    if violations:
        raise LinearityError("; ".join(v.message for v in violations))


def evaluate(
    p: Protocol,
    crn: Crn,
    env: Optional[Env] = None,
    cfg: Optional[FlowConfig] = None,
    trace: Optional[TraceLog] = None,
) -> EvalResult:
    """Deterministic semantics of a protocol, with observations and elapsed time.

    Args:
        p: Linear protocol, closed under ``env``
        crn: Reaction network
        env: Bindings of free sample variables
        cfg: Integrator settings
        trace: Optional list receiving one dense trajectory per equilibration

    Returns:
        EvalResult: Final sample, observations and elapsed time

    Raises:
        LinearityError: If ``p`` is not linear or not closed
        IllPosedError: If an equilibration cannot be integrated
    """
    require_closed_linear(p, env)
    return ProtocolEvaluator(crn, cfg, trace).evaluate(p, env)


def evaluate_sample(
    p: Protocol, crn: Crn, env: Optional[Env] = None, cfg: Optional[FlowConfig] = None
) -> Sample:
    """The final sample only, dropping observations and elapsed time."""
    return evaluate(p, crn, env, cfg).sample
