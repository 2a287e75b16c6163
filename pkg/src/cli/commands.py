"""Command line interface.

Commands: ``check``, ``simulate``, ``estimate``, ``sweep`` and ``replay``.
Exit codes: 0 on success, 1 for user errors (bad input, failed checks,
invalid configuration) and 2 when a simulation fails at run time.
"""

import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import click

from src import __version__
from src.cli import export
from src.config import settings
from src.models.crn import Crn
from src.models.flow import FlowConfig
from src.models.manifest import RunManifest, file_digest
from src.models.noise import NoiseConfig
from src.models.protocol import Protocol
from src.models.quantity import to_decimal
from src.models.sample import TraceLog
from src.models.smc import Axis
from src.services import checks
from src.services.compiler import compile_to_pdmp
from src.services.deterministic import evaluate
from src.services.parser import parse_crn, parse_predicate, parse_protocol, parse_template
from src.services.pdmp_engine import execute
from src.services.smc import estimate as estimate_probability
from src.services.smc import required_samples, run_ensemble
from src.services.smc import sweep as sweep_grid
from src.services.stochastic import eval_stoch
from src.utils.errors import (
    CaptureError,
    ConfigurationError,
    FreshnessError,
    HoleError,
    IllPosedError,
    LinearityError,
    ParseError,
    PredicateError,
    ProtocolToolError,
    SamplingError,
    StructuralError,
    UnboundVariableError,
    ZenoError,
)
from src.utils.logging import get_logger, parse_log_level
from src.utils.random_stream import RandomStream

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_RUNTIME_ERROR = 2

USER_ERRORS = (
    ParseError,
    ConfigurationError,
    HoleError,
    PredicateError,
    LinearityError,
    UnboundVariableError,
    CaptureError,
    FreshnessError,
)
RUNTIME_ERRORS = (IllPosedError, ZenoError, SamplingError, StructuralError)

POSITIVE = click.FloatRange(min=0.0, min_open=True)
PROBABILITY = click.FloatRange(0.0, 1.0, min_open=True, max_open=True)
COUNT = click.IntRange(min=1)

# Context meta key holding the integrator settings of a replayed manifest.
REPLAYED_FLOW = "protocols.replayed_flow"


class ProtocolCli(click.Group):
    """Click group that maps package errors to the documented exit codes."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            code = super().main(*args, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USER_ERROR)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USER_ERROR)
        except USER_ERRORS as e:
            self.fail(e, "error", EXIT_USER_ERROR)
        except RUNTIME_ERRORS as e:
            self.fail(e, "simulation failed", EXIT_RUNTIME_ERROR)
        except ProtocolToolError as e:
            self.fail(e, "error", EXIT_RUNTIME_ERROR)
        except ValueError as e:
            # out-of-range numbers from settings or recorded options
            self.fail(e, "invalid value", EXIT_USER_ERROR)
        sys.exit(code if isinstance(code, int) else EXIT_OK)

    @staticmethod
    def fail(error: Exception, prefix: str, code: int) -> None:
        logger.error(f"{type(error).__name__}: {error}")
        click.echo(f"{prefix}: {error}", err=True)
        for note in getattr(error, "__notes__", []):
            click.echo(f"  {note}", err=True)
        sys.exit(code)


# helpers


def read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read {path}: {e}") from e


def load_crn(path: str) -> Crn:
    try:
        return parse_crn(read_text(path))
    except ParseError as e:
        e.add_note(f"in network file {path}")
        raise


def parse_bindings(values: Sequence[str]) -> Dict[str, float]:
    """``name=value`` pairs binding template parameters."""
    bindings = {}
    for text in values:
        name, sep, raw = text.partition("=")
        try:
            if not sep or not name.strip():
                raise ValueError
            bindings[name.strip()] = float(to_decimal(raw.strip()))
        except ValueError:
            raise HoleError(f"parameter binding must look like name=value, got {text!r}") from None
    return bindings


def load_protocol(path: str, crn: Crn, bindings: Sequence[str] = ()) -> Protocol:
    try:
        return parse_protocol(read_text(path), crn, parse_bindings(bindings) or None)
    except ParseError as e:
        e.add_note(f"in protocol file {path}")
        raise


def flow_config(crn: Crn, rel_tol: Optional[float], abs_tol: Optional[float]) -> FlowConfig:
    """Settings defaults, overridden by flags; ``abs_tol`` is in the network's unit.

    Under ``replay`` the settings recorded in the manifest are used as they
    are, whatever the environment says now.
    """
    ctx = click.get_current_context(silent=True)
    recorded = ctx.meta.get(REPLAYED_FLOW) if ctx is not None else None
    if recorded:
        return FlowConfig.from_dict(recorded)
    cfg = FlowConfig.from_settings()
    if rel_tol is not None:
        cfg = replace(cfg, rel_tol=rel_tol)
    if abs_tol is not None:
        cfg = replace(cfg, abs_tol=abs_tol)
    return cfg.scaled(crn.unit_scale)


def load_noise(source: Optional[str]) -> NoiseConfig:
    return NoiseConfig.load(source) if source else NoiseConfig()


def prepare_out(out: str) -> Path:
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def report(diagnostics: List[checks.Diagnostic]) -> None:
    for diagnostic in diagnostics:
        click.echo(diagnostic.to_json())


def write_manifest(
    ctx: click.Context,
    out: Path,
    crn: Crn,
    cfg: FlowConfig,
    inputs: Sequence[str],
    seed: Optional[int],
    runs: int,
) -> None:
    manifest = RunManifest(
        tool_version=__version__,
        command=ctx.command.name,
        options={k: list(v) if isinstance(v, tuple) else v for k, v in ctx.params.items()},
        inputs={path: file_digest(path) for path in inputs if path},
        flow=cfg.to_dict(),
        concentration_unit=crn.concentration_unit,
        seed=seed,
        runs=runs,
        out=str(out),
    )
    manifest.write(out)


# shared options


def _tolerance_options(function):
    function = click.option(
        "--abs-tol", type=POSITIVE, default=None,
        help="Absolute tolerance in the network's concentration unit.",
    )(function)
    return click.option("--rel-tol", type=POSITIVE, default=None, help="Relative tolerance.")(function)


def _ensemble_options(function):
    for decorator in reversed(
        [
            click.option("--noise", default=None, help="Noise config file or preset name."),
            click.option("--seed", type=int, default=settings.DEFAULT_SEED, show_default=True),
            click.option("--workers", type=COUNT, default=max(1, settings.WORKERS), show_default=True),
            click.option(
                "--on-error", type=click.Choice(["fail", "skip"]), default="fail", show_default=True,
                help="Stop at the first failing run, or skip failing runs.",
            ),
            click.option(
                "--engine", type=click.Choice(["eval", "pdmp"]), default="eval", show_default=True,
                help="Evaluate directly, or run the compiled hybrid process.",
            ),
            click.option("--out", default=settings.OUTPUT_DIRECTORY_PATH, show_default=True),
        ]
    ):
        function = decorator(function)
    return function


@click.group(cls=ProtocolCli)
@click.version_option(__version__, prog_name="protocols")
@click.option(
    "--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR; overrides LOG_LEVEL."
)
def cli(log_level: Optional[str]) -> None:
    """Parse, check, simulate and model-check experimental protocols."""
    if log_level is not None:
        logging.getLogger().setLevel(parse_log_level(log_level))


@cli.command()
@click.argument("protocol", type=click.Path(dir_okay=False))
@click.argument("crn", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(["det", "stoch"]), default="det", show_default=True)
@click.option("--noise", default=None, help="Noise config file or preset name.")
@click.option("--param", "bindings", multiple=True, help="Template binding name=value.")
def check(protocol: str, crn: str, mode: str, noise: Optional[str], bindings: Tuple[str, ...]) -> int:
    """Statically check PROTOCOL against the network in CRN.

    Prints one JSON line per finding and exits with 1 if any is an error.
    """
    diagnostics: List[checks.Diagnostic] = []
    try:
        network = parse_crn(read_text(crn))
    except ParseError as e:
        report([checks.from_parse_error(e, "crn")])
        return EXIT_USER_ERROR
    diagnostics.extend(checks.check_crn(network))
    try:
        parsed = parse_protocol(read_text(protocol), network, parse_bindings(bindings) or None)
    except ParseError as e:
        report(diagnostics + [checks.from_parse_error(e, "protocol")])
        return EXIT_USER_ERROR
    except HoleError as e:
        report(diagnostics + [checks.Diagnostic("error", "hole", str(e))])
        return EXIT_USER_ERROR
    diagnostics.extend(
        checks.check_protocol(parsed, network, stochastic=mode == "stoch", noise=load_noise(noise))
    )
    report(diagnostics)
    return EXIT_USER_ERROR if checks.has_errors(diagnostics) else EXIT_OK


@cli.command()
@click.argument("protocol", type=click.Path(dir_okay=False))
@click.argument("crn", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(["det", "stoch"]), default="det", show_default=True)
@click.option("--runs", type=COUNT, default=1, show_default=True, help="Runs in stochastic mode.")
@click.option("--trace", is_flag=True, help="Write dense trajectories of each equilibration.")
@click.option("--param", "bindings", multiple=True, help="Template binding name=value.")
@_ensemble_options
@_tolerance_options
@click.pass_context
def simulate(
    ctx: click.Context,
    protocol: str,
    crn: str,
    mode: str,
    runs: int,
    trace: bool,
    bindings: Tuple[str, ...],
    noise: Optional[str],
    seed: int,
    workers: int,
    on_error: str,
    engine: str,
    out: str,
    rel_tol: Optional[float],
    abs_tol: Optional[float],
) -> int:
    """Evaluate PROTOCOL once (det) or as an ensemble (stoch)."""
    network = load_crn(crn)
    parsed = load_protocol(protocol, network, bindings)
    noise_config = load_noise(noise)
    diagnostics = checks.check_protocol(parsed, network, stochastic=mode == "stoch", noise=noise_config)
    if checks.has_errors(diagnostics):
        report(diagnostics)
        return EXIT_USER_ERROR
    cfg = flow_config(network, rel_tol, abs_tol)
    directory = prepare_out(out)
    traces: TraceLog = []

    if mode == "det":
        result = evaluate(parsed, network, cfg=cfg, trace=traces if trace else None)
        export.write_final(directory / "final.json", result, network)
        runs = 1
    else:
        records = run_ensemble(
            parsed, network, runs, noise_config, seed, cfg,
            workers=workers, on_error=on_error, engine=engine, show_progress=True,
            description="simulate",
        )
        export.write_runs(directory / "runs.csv", records, network, seed)
        export.write_observations(directory / "observations.csv", records, network)
        if trace:
            first_run = RandomStream(seed).child(0)
            if engine == "pdmp":
                compiled = compile_to_pdmp(parsed, network, noise_config)
                path = execute(
                    compiled.pdmp, compiled.initial_mode, compiled.initial_state(first_run.child(0)),
                    float("inf"), first_run.child(1), cfg,
                )
                export.write_segments(directory / "segments.csv", [path], compiled.pdmp.kinds)
            else:
                eval_stoch(parsed, network, cfg=cfg, noise=noise_config, rng=first_run, trace=traces)
        click.echo(export.summarize(records, network))

    for k, record in enumerate(traces):
        export.write_trace(directory / f"trace_{k}.csv", record, network)
    write_manifest(ctx, directory, network, cfg, [protocol, crn, noise or ""], seed, runs)
    logger.info(f"Wrote simulation outputs to {directory}")
    return EXIT_OK


@cli.command()
@click.argument("protocol", type=click.Path(dir_okay=False))
@click.argument("crn", type=click.Path(dir_okay=False))
@click.option("--predicate", required=True, help='e.g. "Output in [21.2, 22.5] at final".')
@click.option("--runs", type=COUNT, default=None, help="Number of runs.")
@click.option("--epsilon", type=PROBABILITY, default=None, help="Plan the number of runs for this error.")
@click.option("--delta", type=PROBABILITY, default=0.01, show_default=True)
@click.option("--param", "bindings", multiple=True, help="Template binding name=value.")
@_ensemble_options
@_tolerance_options
@click.pass_context
def estimate(
    ctx: click.Context,
    protocol: str,
    crn: str,
    predicate: str,
    runs: Optional[int],
    epsilon: Optional[float],
    delta: float,
    bindings: Tuple[str, ...],
    noise: Optional[str],
    seed: int,
    workers: int,
    on_error: str,
    engine: str,
    out: str,
    rel_tol: Optional[float],
    abs_tol: Optional[float],
) -> int:
    """Estimate the probability that PROTOCOL satisfies a predicate."""
    if runs is None:
        if epsilon is None:
            raise click.UsageError("give --runs or --epsilon")
        runs = required_samples(epsilon, delta)
        logger.info(f"Planned {runs} runs for epsilon={epsilon}, delta={delta}")
    network = load_crn(crn)
    parsed = load_protocol(protocol, network, bindings)
    pred = parse_predicate(predicate, network)
    noise_config = load_noise(noise)
    diagnostics = checks.check_protocol(parsed, network, stochastic=True, noise=noise_config)
    if checks.has_errors(diagnostics):
        report(diagnostics)
        return EXIT_USER_ERROR
    cfg = flow_config(network, rel_tol, abs_tol)
    directory = prepare_out(out)
    result = estimate_probability(
        parsed, network, pred, runs, delta, noise_config, seed, cfg,
        workers=workers, on_error=on_error, engine=engine, show_progress=True,
    )
    export.write_json(
        directory / "estimate.json", {"predicate": pred.describe(network), **result.to_dict()}
    )
    write_manifest(ctx, directory, network, cfg, [protocol, crn, noise or ""], seed, runs)
    click.echo(f"{pred.describe(network)}: {export.format_estimate(result)}")
    return EXIT_OK


@cli.command()
@click.argument("template", type=click.Path(dir_okay=False))
@click.argument("crn", type=click.Path(dir_okay=False))
@click.option("--param", "axes", multiple=True, required=True, help="Axis name=lo:hi:steps.")
@click.option("--predicate", required=True, help='e.g. "Output in [21.2, 22.5] at final".')
@click.option("--runs", type=COUNT, default=500, show_default=True, help="Runs per cell.")
@click.option("--delta", type=PROBABILITY, default=0.01, show_default=True)
@_ensemble_options
@_tolerance_options
@click.pass_context
def sweep(
    ctx: click.Context,
    template: str,
    crn: str,
    axes: Tuple[str, ...],
    predicate: str,
    runs: int,
    delta: float,
    noise: Optional[str],
    seed: int,
    workers: int,
    on_error: str,
    engine: str,
    out: str,
    rel_tol: Optional[float],
    abs_tol: Optional[float],
) -> int:
    """Estimate a predicate over a grid of TEMPLATE parameters.

    Cell c draws its runs from child stream c of --seed, so a one-cell sweep
    does not repeat `estimate` with the same seed.
    """
    network = load_crn(crn)
    parsed_template = parse_template(read_text(template), network)
    grid_axes = [Axis.parse(text) for text in axes]
    parsed_template.check_parameters([axis.name for axis in grid_axes])
    pred = parse_predicate(predicate, network)
    noise_config = load_noise(noise)
    sample_cell = parsed_template.instantiate({axis.name: axis.values[0] for axis in grid_axes})
    diagnostics = checks.check_protocol(sample_cell, network, stochastic=True, noise=noise_config)
    if checks.has_errors(diagnostics):
        report(diagnostics)
        return EXIT_USER_ERROR
    cfg = flow_config(network, rel_tol, abs_tol)
    directory = prepare_out(out)
    grid = sweep_grid(
        parsed_template, grid_axes, pred, runs, delta, noise_config, seed, cfg,
        workers=workers, on_error=on_error, engine=engine, show_progress=True,
    )
    export.write_grid(directory / "grid.csv", grid)
    export.write_json(directory / "grid.json", {"predicate": pred.describe(network), **grid.to_dict()})
    write_manifest(ctx, directory, network, cfg, [template, crn, noise or ""], seed, runs)
    click.echo(export.format_grid(grid))
    click.echo("\nBest cells (intervals reaching the best lower bound):")
    click.echo(export.format_argmax(grid))
    return EXIT_OK


@cli.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--out", default=None, help="Output directory; defaults to the recorded one.")
@click.pass_context
def replay(ctx: click.Context, manifest: str, out: Optional[str]) -> int:
    """Rerun the command recorded in MANIFEST."""
    recorded = RunManifest.load(manifest)
    if recorded.tool_version != __version__:
        logger.warning(
            f"Manifest written by version {recorded.tool_version}, running {__version__}"
        )
    for path in recorded.changed_inputs():
        logger.warning(f"Input {path} changed since the manifest was written")
    command = cli.get_command(ctx, recorded.command)
    if command is None or recorded.command == "replay":
        raise ConfigurationError(f"manifest records an unknown command {recorded.command!r}")
    options = dict(recorded.options)
    if out is not None:
        options["out"] = out
    ctx.meta[REPLAYED_FLOW] = dict(recorded.flow)
    logger.info(f"Replaying {recorded.command} into {options.get('out')}")
    return ctx.invoke(command, **options)
