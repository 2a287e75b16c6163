"""Statistical model checking by Monte Carlo sampling.

Run ``i`` of an ensemble uses ``base.child(i)`` of the ensemble's stream, and
runs are collected by index, so results do not depend on how many worker
processes share the work or in which order they finish.
"""

import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from itertools import product
from typing import List, Literal, Optional, Sequence, Tuple

from scipy.stats import binomtest
from tqdm import tqdm

from src.models.crn import Crn
from src.models.flow import FlowConfig
from src.models.noise import NoiseConfig
from src.models.protocol import Protocol
from src.models.sample import Env, EvalResult
from src.models.smc import Axis, Estimate, Predicate, SweepCell, SweepGrid
from src.services.compiler import compile_to_pdmp, run_compiled
from src.services.deterministic import require_closed_linear
from src.services.parser import ProtocolTemplate
from src.services.stochastic import eval_stoch
from src.services.syntax import is_numbered, number_nodes
from src.utils.errors import PredicateError, ProtocolToolError
from src.utils.logging import get_logger, log_context
from src.utils.random_stream import RandomStream

logger = get_logger(__name__)

ErrorPolicy = Literal["fail", "skip"]
Engine = Literal["eval", "pdmp"]


def required_samples(epsilon: float, delta: float) -> int:
    """Runs needed for ``P(|p_hat - p| > epsilon) <= delta`` by Hoeffding's bound."""
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError(f"epsilon and delta must lie in (0, 1), got {epsilon}, {delta}")
    return max(1, math.ceil(math.log(2.0 / delta) / (2.0 * epsilon**2)))


def clopper_pearson(successes: int, n: int, delta: float) -> Tuple[float, float]:
    """Exact binomial confidence interval at level ``1 - delta``."""
    if n == 0:
        return 0.0, 1.0
    interval = binomtest(successes, n).proportion_ci(confidence_level=1.0 - delta, method="exact")
    return float(interval.low), float(interval.high)


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one run: a result, or the error that stopped it."""

    index: int
    result: Optional[EvalResult] = None
    error: Optional[ProtocolToolError] = None


@dataclass(frozen=True)
class EnsembleJob:
    """Everything a worker process needs to execute runs."""

    protocol: Protocol
    crn: Crn
    noise: NoiseConfig
    base: RandomStream
    cfg: FlowConfig
    env: Optional[dict] = None
    engine: Engine = "eval"


def _run_chunk(job: EnsembleJob, indices: Sequence[int]) -> List[RunRecord]:
    compiled = compile_to_pdmp(job.protocol, job.crn, job.noise) if job.engine == "pdmp" else None
    records = []
    for index in indices:
        run = job.base.child(index)
        try:
            with log_context(run=index):
                if compiled is not None:
                    result = run_compiled(compiled, run, job.cfg)
                else:
                    result = eval_stoch(job.protocol, job.crn, job.env, job.cfg, job.noise, run)
            records.append(RunRecord(index, result=result))
        except ProtocolToolError as e:
            records.append(RunRecord(index, error=e))
    return records


def _chunks(n: int, workers: int) -> List[range]:
    size = max(1, math.ceil(n / (workers * 4)))
    return [range(start, min(start + size, n)) for start in range(0, n, size)]


def run_ensemble(
    p: Protocol,
    crn: Crn,
    n: int,
    noise: NoiseConfig,
    seed: int = 0,
    cfg: Optional[FlowConfig] = None,
    env: Optional[Env] = None,
    workers: int = 1,
    on_error: ErrorPolicy = "fail",
    engine: Engine = "eval",
    stream: Optional[RandomStream] = None,
    show_progress: bool = False,
    description: str = "runs",
) -> List[RunRecord]:
    """Execute ``n`` independent stochastic runs.

    Args:
        p: Linear protocol, closed under ``env``
        crn: Reaction network
        n: Number of runs
        noise: Noise configuration
        seed: Root seed; ignored when ``stream`` is given
        cfg: Integrator settings
        env: Bindings of free sample variables
        workers: Worker processes; 1 runs in this process
        on_error: ``fail`` re-raises the first failing run, ``skip`` keeps going
        engine: ``eval`` for the evaluator, ``pdmp`` for the compiled process
        stream: Ensemble stream; defaults to ``RandomStream(seed)``
        show_progress: Draw a progress bar on stderr
        description: Progress bar label

    Returns:
        List[RunRecord]: One record per run, ordered by index

    Raises:
        ProtocolToolError: The error of the lowest failing run under ``fail``
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    require_closed_linear(p, env)
    if not is_numbered(p):
        p = number_nodes(p)
    job = EnsembleJob(
        protocol=p,
        crn=crn,
        noise=noise,
        base=stream or RandomStream(seed),
        cfg=cfg or FlowConfig(),
        env=dict(env) if env else None,
        engine=engine,
    )

    records: List[RunRecord] = []
    with tqdm(total=n, desc=description, disable=not show_progress, leave=False) as bar:
        if workers <= 1:
            for chunk in _chunks(n, 1):
                batch = _run_chunk(job, chunk)
                records.extend(batch)
                bar.update(len(batch))
                if on_error == "fail" and any(r.error for r in batch):
                    break
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(_run_chunk, job, chunk) for chunk in _chunks(n, workers)]
                for future in as_completed(futures):
                    batch = future.result()
                    records.extend(batch)
                    bar.update(len(batch))

    records.sort(key=lambda r: r.index)
    failed = [r for r in records if r.error is not None]
    if failed:
        if on_error == "fail":
            first = failed[0]
            logger.error(f"Run {first.index} failed: {first.error}")
            first.error.add_note(f"run index {first.index} (stream {job.base.child(first.index)!r})")
            raise first.error
        logger.warning(f"{len(failed)} of {n} runs failed and were skipped")
    return records


def estimate(
    p: Protocol,
    crn: Crn,
    pred: Predicate,
    n: int,
    delta: float,
    noise: NoiseConfig,
    seed: int = 0,
    cfg: Optional[FlowConfig] = None,
    env: Optional[Env] = None,
    workers: int = 1,
    on_error: ErrorPolicy = "fail",
    engine: Engine = "eval",
    stream: Optional[RandomStream] = None,
    show_progress: bool = False,
) -> Estimate:
    """Probability that a run satisfies ``pred``, with an exact confidence interval.

    A run counts as failed when it raises, or when the predicate cannot be
    evaluated on its result (say, an observation it never made). Under the
    ``skip`` policy failed runs are left out of ``n`` and counted in
    ``Estimate.failed``; under ``fail`` the lowest failing run's error is raised.

    Raises:
        ProtocolToolError: Under ``fail``, the error of the lowest failing run
        PredicateError: Under ``fail``, if the predicate cannot be evaluated
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    records = run_ensemble(
        p, crn, n, noise, seed, cfg, env, workers, on_error, engine, stream,
        show_progress, description="estimate",
    )
    evaluated = successes = 0
    for record in records:
        if record.result is None:
            continue
        try:
            holds = pred.holds(record.result, crn)
        except PredicateError as e:
            if on_error == "fail":
                e.add_note(f"run index {record.index}")
                raise
            logger.warning(f"Run {record.index} skipped: {e}")
            continue
        evaluated += 1
        successes += holds
    ci_lo, ci_hi = clopper_pearson(successes, evaluated, delta)
    p_hat = successes / evaluated if evaluated else 0.0
    return Estimate(
        p_hat=p_hat,
        n=evaluated,
        successes=successes,
        ci_lo=min(ci_lo, p_hat),
        ci_hi=max(ci_hi, p_hat) if evaluated else ci_hi,
        delta=delta,
        seed=seed,
        failed=len(records) - evaluated,
    )


def sweep(
    template: ProtocolTemplate,
    axes: Sequence[Axis],
    pred: Predicate,
    n: int,
    delta: float,
    noise: NoiseConfig,
    seed: int = 0,
    cfg: Optional[FlowConfig] = None,
    workers: int = 1,
    on_error: ErrorPolicy = "fail",
    engine: Engine = "eval",
    show_progress: bool = False,
) -> SweepGrid:
    """Estimate ``pred`` at every point of a rectangular parameter grid.

    Cell ``c`` (row-major, last axis fastest) draws its runs from
    ``RandomStream(seed).child(c)``, whatever the grid's shape, so a cell's
    runs do not change when axes grow. A one-cell sweep therefore matches
    ``estimate(..., stream=RandomStream(seed).child(0))``, not
    ``estimate(..., seed=seed)``.

    Raises:
        HoleError: If the axes do not match the template's parameters
    """
    axes = tuple(axes)
    names = [axis.name for axis in axes]
    template.check_parameters(names)
    root = RandomStream(seed)
    cells: List[SweepCell] = []
    grid = list(product(*(axis.values for axis in axes)))
    for index, values in enumerate(tqdm(grid, desc="sweep", disable=not show_progress)):
        params = tuple(zip(names, values))
        protocol = template.instantiate(dict(params))
        try:
            with log_context(cell=index):
                result = estimate(
                    protocol, template.crn, pred, n, delta, noise, seed, cfg,
                    workers=workers, on_error=on_error, engine=engine, stream=root.child(index),
                )
        except ProtocolToolError as e:
            if on_error == "fail":
                e.add_note(f"sweep cell {index} {dict(params)}")
                raise
            logger.warning(f"Sweep cell {index} {dict(params)} failed: {e}")
            cells.append(SweepCell(index, params, error=str(e)))
            continue
        if result.n == 0:
            cells.append(SweepCell(index, params, error=f"all {n} runs failed"))
        else:
            cells.append(SweepCell(index, params, estimate=result))
    return SweepGrid(axes, tuple(cells), n, delta, seed)
