"""Compilation of protocols to piecewise deterministic Markov processes.

A closed, linear protocol is flattened, in evaluation order, into a program
over sample registers. Each register holds one sample value together with its
elapsed protocol time. Dispense and Equilibrate steps become PDMP modes.
The remaining steps (literals, Mix, Dispose, Observe) take no time and are
folded into the reset that leaves the preceding mode.

Continuous state layout::

    [register 0: conc..., volume, temperature, elapsed]
    ...
    [observation slot 0: conc..., time]
    ...
    [rate multipliers, one per reaction]
    [mode timer, global clock]

Only the register being equilibrated moves; every other coordinate is
constant within a mode. Sibling samples are equilibrated one after the other,
each with its own elapsed clock, so Mix still combines them at the later of
the two times.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from src.models.crn import Crn
from src.models.flow import FlowConfig
from src.models.noise import NoiseConfig
from src.models.pdmp import HybridPath, Mode, Pdmp
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
from src.models.sample import EvalResult, Observation, Sample
from src.services import kinetics
from src.services.deterministic import mix_samples, require_closed_linear, split_sample
from src.services.pdmp_engine import execute
from src.services.stochastic import (
    noisy_observation,
    perturb_rates,
    sample_dispense_fraction,
)
from src.services.syntax import desugar, is_desugared
from src.utils.errors import NonpositiveEquilibrateTimeError, StructuralError
from src.utils.logging import get_logger
from src.utils.random_stream import RandomStream

logger = get_logger(__name__)


# Program steps


@dataclass(frozen=True)
class LoadStep:
    register: int
    sample: Initial


@dataclass(frozen=True)
class MixStep:
    register: int
    left: int
    right: int


@dataclass(frozen=True)
class DisposeStep:
    register: int
    source: int


@dataclass(frozen=True)
class ObserveStep:
    register: int
    slot: int


@dataclass(frozen=True)
class DispenseStep:
    source: int
    kept: int
    rest: int
    fraction: float


@dataclass(frozen=True)
class EquilibrateStep:
    register: int
    duration: float


Step = Union[LoadStep, MixStep, DisposeStep, ObserveStep, DispenseStep, EquilibrateStep]
TimedStep = Union[DispenseStep, EquilibrateStep]


@dataclass
class _Program:
    """Output of flattening a protocol."""

    steps: List[Step] = field(default_factory=list)
    registers: int = 0
    slot_ids: List[int] = field(default_factory=list)
    # Observation slots carried by each register, in evaluation order.
    carried: Dict[int, Tuple[int, ...]] = field(default_factory=dict)

    def new_register(self, slots: Tuple[int, ...] = ()) -> int:
        self.registers += 1
        self.carried[self.registers - 1] = slots
        return self.registers - 1


def _flatten(p: Protocol) -> Tuple[_Program, int]:
    program = _Program()

    def go(node: Protocol, env: Dict[str, int]) -> int:
        match node:
            case Var(name=name):
                return env[name]
            case Initial():
                register = program.new_register()
                program.steps.append(LoadStep(register, node))
                return register
            case Mix(left=left, right=right):
                a = go(left, env)
                b = go(right, env)
                register = program.new_register(program.carried[a] + program.carried[b])
                program.steps.append(MixStep(register, a, b))
                return register
            case Let(name=name, bound=bound, body=body):
                return go(body, {**env, name: go(bound, env)})
            case LetDispense(left=x, right=y, source=source, fraction=fraction, body=body):
                source_register = go(source, env)
                kept = program.new_register(program.carried[source_register])
                rest = program.new_register()
                program.steps.append(DispenseStep(source_register, kept, rest, fraction))
                return go(body, {**env, x: kept, y: rest})
            case Equilibrate(sample=inner, duration=duration):
                register = go(inner, env)
                program.steps.append(EquilibrateStep(register, duration))
                return register
            case Dispose(sample=inner):
                source_register = go(inner, env)
                register = program.new_register(program.carried[source_register])
                program.steps.append(DisposeStep(register, source_register))
                return register
            case Observe(sample=inner, idn=idn):
                register = go(inner, env)
                slot = len(program.slot_ids)
                program.slot_ids.append(idn)
                program.carried[register] = program.carried[register] + (slot,)
                program.steps.append(ObserveStep(register, slot))
                return register
        raise TypeError(f"not a protocol node: {type(node).__name__}")

    return program, go(p, {})


class _Layout:
    """Offsets into the continuous state."""

    def __init__(self, species: int, registers: int, slots: int, reactions: int) -> None:
        self.species = species
        self.register_width = species + 3
        self.slot_width = species + 1
        self.slots_start = registers * self.register_width
        self.rates_start = self.slots_start + slots * self.slot_width
        self.timer = self.rates_start + reactions
        self.clock = self.timer + 1
        self.dimension = self.clock + 1

    def conc(self, register: int) -> slice:
        start = register * self.register_width
        return slice(start, start + self.species)

    def volume(self, register: int) -> int:
        return register * self.register_width + self.species

    def temperature(self, register: int) -> int:
        return self.volume(register) + 1

    def elapsed(self, register: int) -> int:
        return self.volume(register) + 2

    def slot(self, slot: int) -> slice:
        start = self.slots_start + slot * self.slot_width
        return slice(start, start + self.species)

    def slot_time(self, slot: int) -> int:
        return self.slots_start + slot * self.slot_width + self.species

    @property
    def rates(self) -> slice:
        return slice(self.rates_start, self.timer)


@dataclass(frozen=True)
class CompiledProtocol:
    """A protocol compiled to a PDMP.

    Attributes:
        pdmp: The process; mode ``k`` runs the ``k``-th timed step and the
            last mode is the absorbing terminal mode
        crn: Network of the protocol
        noise: Noise configuration the process was built for
        result_register: Register holding the protocol's value
    """

    pdmp: Pdmp
    crn: Crn
    noise: NoiseConfig
    layout: _Layout = field(repr=False)
    prologue: Tuple[Step, ...] = field(repr=False)
    result_register: int
    slot_ids: Tuple[int, ...]
    result_slots: Tuple[int, ...]

    @property
    def initial_mode(self) -> int:
        return 0

    def initial_state(self, rng: RandomStream) -> np.ndarray:
        """Sample the initial continuous state: rate multipliers and the untimed prologue."""
        layout = self.layout
        x = np.zeros(layout.dimension)
        perturbed = perturb_rates(self.crn, self.noise, rng)
        if self.crn.reactions:
            x[layout.rates] = perturbed.rates / self.crn.rates
        _run_steps(self.prologue, x, layout, self.noise, rng)
        return x

    def register_sample(self, x: np.ndarray, register: int) -> Sample:
        layout = self.layout
        conc = kinetics.clamp_concentrations(x[layout.conc(register)])
        return Sample(
            tuple(conc), x[layout.volume(register)], x[layout.temperature(register)]
        )

    def result(self, path: HybridPath) -> EvalResult:
        """Read the protocol's value off the final state of a path."""
        x = path.final_state
        layout = self.layout
        observations = tuple(
            Observation(tuple(x[layout.slot(s)]), self.slot_ids[s], x[layout.slot_time(s)])
            for s in self.result_slots
        )
        return EvalResult(
            self.register_sample(x, self.result_register),
            observations,
            x[layout.elapsed(self.result_register)],
        )


def _sample_at(x: np.ndarray, layout: _Layout, register: int) -> Sample:
    return Sample(
        tuple(x[layout.conc(register)]),
        x[layout.volume(register)],
        x[layout.temperature(register)],
    )


def _store(x: np.ndarray, layout: _Layout, register: int, sample: Sample, elapsed: float) -> None:
    x[layout.conc(register)] = sample.conc
    x[layout.volume(register)] = sample.volume
    x[layout.temperature(register)] = sample.temperature
    x[layout.elapsed(register)] = elapsed


def _run_steps(
    steps: Tuple[Step, ...], x: np.ndarray, layout: _Layout, noise: NoiseConfig, rng: RandomStream
) -> None:
    """Apply untimed steps to ``x`` in place."""
    for step in steps:
        match step:
            case LoadStep(register=r, sample=s):
                _store(x, layout, r, Sample(s.conc, s.volume, s.temperature), 0.0)
            case MixStep(register=r, left=a, right=b):
                mixed = mix_samples(_sample_at(x, layout, a), _sample_at(x, layout, b))
                elapsed = max(x[layout.elapsed(a)], x[layout.elapsed(b)])
                _store(x, layout, r, mixed, elapsed)
            case DisposeStep(register=r, source=s):
                _store(x, layout, r, Sample.empty(layout.species), x[layout.elapsed(s)])
            case ObserveStep(register=r, slot=slot):
                x[layout.slot(slot)] = noisy_observation(noise, tuple(x[layout.conc(r)]), rng)
                x[layout.slot_time(slot)] = x[layout.elapsed(r)]
            case _:
                raise TypeError(f"not an untimed step: {step!r}")


def compile_to_pdmp(
    p: Protocol, crn: Crn, noise: Optional[NoiseConfig] = None
) -> CompiledProtocol:
    """Compile a closed linear protocol to a PDMP.

    Dispense modes exit at once through their guard; their reset draws the
    realised fraction. Equilibrate modes flow the register's rate equations
    and exit with intensity ``1 / t`` under exponential equilibration, or
    through the guard ``timer >= t`` otherwise.

    Raises:
        LinearityError: If ``p`` is not linear or not closed
        NonpositiveEquilibrateTimeError: If an exponential equilibration has
            duration 0
    """
    noise = noise or NoiseConfig()
    require_closed_linear(p)
    if not is_desugared(p):
        p = desugar(p)
    program, result_register = _flatten(p)
    for step in program.steps:
        if isinstance(step, LoadStep) and len(step.sample.conc) != crn.size:
            raise StructuralError(
                f"sample has {len(step.sample.conc)} concentrations, the network has {crn.size} species"
            )

    exponential = noise.equilibrate.kind == "exponential"
    timed: List[TimedStep] = []
    prologue: List[Step] = []
    epilogues: List[List[Step]] = []
    for step in program.steps:
        if isinstance(step, EquilibrateStep) and step.duration == 0.0:
            if exponential:
                raise NonpositiveEquilibrateTimeError(
                    "exponential equilibration needs a duration > 0, got 0 s"
                )
            continue
        if isinstance(step, (DispenseStep, EquilibrateStep)):
            timed.append(step)
            epilogues.append([])
        elif epilogues:
            epilogues[-1].append(step)
        else:
            prologue.append(step)

    layout = _Layout(crn.size, program.registers, len(program.slot_ids), len(crn.reactions))
    modes: List[Mode] = []
    for index, step in enumerate(timed):
        if isinstance(step, DispenseStep):
            modes.append(Mode("dispense", field=_still(layout), guard=_always))
        elif exponential:
            modes.append(
                Mode(
                    "equilibrate",
                    field=_equilibrate_field(crn, layout, step.register),
                    intensities={index + 1: _constant(1.0 / step.duration)},
                )
            )
        else:
            modes.append(
                Mode(
                    "equilibrate",
                    field=_equilibrate_field(crn, layout, step.register),
                    guard=_timer_reaches(layout, step.duration),
                )
            )
    modes.append(Mode("terminal"))

    def reset(q: int, x: np.ndarray, cause: str, target: Optional[int], rng: RandomStream):
        step = timed[q]
        match step:
            case DispenseStep(source=s, kept=kept, rest=rest, fraction=fraction):
                source = _sample_at(x, layout, s)
                realised = sample_dispense_fraction(noise, source.volume, fraction, rng)
                first, second = split_sample(source, realised)
                elapsed = x[layout.elapsed(s)]
                _store(x, layout, kept, first, elapsed)
                _store(x, layout, rest, second, elapsed)
            case EquilibrateStep(register=r, duration=duration):
                x[layout.conc(r)] = kinetics.clamp_concentrations(x[layout.conc(r)])
                x[layout.elapsed(r)] += x[layout.timer] if exponential else duration
        x[layout.timer] = 0.0
        _run_steps(tuple(epilogues[q]), x, layout, noise, rng)
        return q + 1, x

    pdmp = Pdmp(layout.dimension, tuple(modes), reset, nonnegative=True)
    logger.debug(
        f"Compiled protocol to {len(modes)} modes over {layout.dimension} coordinates "
        f"({program.registers} registers, {len(program.slot_ids)} observations)"
    )
    return CompiledProtocol(
        pdmp=pdmp,
        crn=crn,
        noise=noise,
        layout=layout,
        prologue=tuple(prologue),
        result_register=result_register,
        slot_ids=tuple(program.slot_ids),
        result_slots=program.carried[result_register],
    )


def _always(_x: np.ndarray) -> bool:
    return True


def _constant(value: float):
    return lambda _x: value


def _still(layout: _Layout):
    def flow(_x: np.ndarray) -> np.ndarray:
        return np.zeros(layout.dimension)

    return flow


def _timer_reaches(layout: _Layout, duration: float):
    def guard(x: np.ndarray) -> bool:
        return x[layout.timer] >= duration

    return guard


def _equilibrate_field(crn: Crn, layout: _Layout, register: int):
    conc = layout.conc(register)
    volume = layout.volume(register)
    temperature = layout.temperature(register)

    def flow(x: np.ndarray) -> np.ndarray:
        dx = np.zeros(layout.dimension)
        if x[volume] > 0.0:
            dx[conc] = kinetics.drift_with_multipliers(
                crn, x[conc], x[layout.rates], x[temperature]
            )
        dx[layout.timer] = 1.0
        dx[layout.clock] = 1.0
        return dx

    return flow


def run_compiled(
    compiled: CompiledProtocol,
    rng: RandomStream,
    cfg: Optional[FlowConfig] = None,
    max_jumps: Optional[int] = None,
) -> EvalResult:
    """One stochastic run through the compiled PDMP.

    ``rng.child(0)`` draws the initial state and ``rng.child(1)`` drives the
    path.
    """
    x0 = compiled.initial_state(rng.child(0))
    path = execute(
        compiled.pdmp,
        compiled.initial_mode,
        x0,
        math.inf,
        rng.child(1),
        cfg,
        max_jumps,
    )
    return compiled.result(path)
