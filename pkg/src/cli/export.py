"""Output files written by the commands.

JSON holds single structured results, CSV holds ensembles and grids.
Concentration columns in CSV files use the network's declared unit (recorded
as ``concentration_unit`` in the manifest); JSON results are in mol/L.
"""

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np
from tabulate import tabulate

from src.models.crn import Crn
from src.models.manifest import SCHEMA_VERSION
from src.models.pdmp import HybridPath
from src.models.sample import EvalResult, TraceRecord
from src.models.smc import Estimate, SweepGrid
from src.services.smc import RunRecord

PathLike = Union[str, Path]


def write_json(path: PathLike, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _in_unit(conc: Sequence[float], crn: Crn) -> List[float]:
    return [float(c) / crn.unit_scale for c in conc]


def write_final(path: PathLike, result: EvalResult, crn: Crn) -> Path:
    return write_json(
        path,
        {"schema_version": SCHEMA_VERSION, **result.to_dict(list(crn.names))},
    )


def write_trace(path: PathLike, record: TraceRecord, crn: Crn) -> Path:
    """One equilibration: ``time_s`` (protocol time) then a column per species."""
    rows = (
        [record.start + float(t), *_in_unit(state, crn)]
        for t, state in zip(record.times, record.states)
    )
    return _write_rows(path, ["time_s", *crn.names], rows)


def write_runs(path: PathLike, records: Sequence[RunRecord], crn: Crn, seed: int) -> Path:
    rows = (
        [r.index, seed, *_in_unit(r.result.sample.conc, crn), r.result.elapsed]
        for r in records
        if r.result is not None
    )
    return _write_rows(path, ["run_index", "seed", *crn.names, "elapsed_s"], rows)


def write_observations(path: PathLike, records: Sequence[RunRecord], crn: Crn) -> Path:
    rows = (
        [r.index, obs.idn, obs.time, *_in_unit(obs.conc, crn)]
        for r in records
        if r.result is not None
        for obs in r.result.observations
    )
    return _write_rows(path, ["run_index", "idn", "time_s", *crn.names], rows)


def write_segments(path: PathLike, paths: Sequence[HybridPath], kinds: Sequence[str]) -> Path:
    """Segment table of compiled-process runs."""
    rows = (
        [index, row["segment"], row["kind"], row["entry_time_s"], row["exit_time_s"], row["cause"]]
        for index, hybrid in enumerate(paths)
        for row in hybrid.to_rows(tuple(kinds))
    )
    return _write_rows(
        path, ["run_index", "segment", "mode", "entry_time_s", "exit_time_s", "cause"], rows
    )


def write_grid(path: PathLike, grid: SweepGrid) -> Path:
    """One row per cell: parameters, then ``p_hat,ci_lo,ci_hi,n``."""

    def row(cell) -> list:
        values = [value for _, value in cell.params]
        if cell.estimate is None:
            return [*values, "", "", "", 0]
        e = cell.estimate
        return [*values, e.p_hat, e.ci_lo, e.ci_hi, e.n]

    return _write_rows(
        path, [*grid.names, "p_hat", "ci_lo", "ci_hi", "n"], (row(c) for c in grid.cells)
    )


def format_estimate(estimate: Estimate) -> str:
    return (
        f"p_hat = {estimate.p_hat:.4f}  "
        f"{100 * (1 - estimate.delta):g}% CI [{estimate.ci_lo:.4f}, {estimate.ci_hi:.4f}]  "
        f"n = {estimate.n}" + (f"  failed = {estimate.failed}" if estimate.failed else "")
    )


def format_grid(grid: SweepGrid) -> str:
    """Heat map of ``p_hat`` for two axes, a plain table otherwise."""

    def value(cell) -> Union[float, str]:
        return cell.estimate.p_hat if cell.estimate is not None else "failed"

    if len(grid.axes) == 2:
        rows_axis, cols_axis = grid.axes
        width = len(cols_axis.values)
        table = [
            [rows_axis.values[i], *(value(c) for c in grid.cells[i * width:(i + 1) * width])]
            for i in range(len(rows_axis.values))
        ]
        headers = [f"{rows_axis.name} \\ {cols_axis.name}", *cols_axis.values]
        return tabulate(table, headers=headers, floatfmt=".3f")
    table = [[*(v for _, v in c.params), value(c)] for c in grid.cells]
    return tabulate(table, headers=[*grid.names, "p_hat"], floatfmt=".3f")


def format_argmax(grid: SweepGrid) -> str:
    best = grid.argmax()
    if not best:
        return "no cell produced an estimate"
    table = [
        [*(v for _, v in c.params), c.estimate.p_hat, c.estimate.ci_lo, c.estimate.ci_hi]
        for c in best
    ]
    return tabulate(table, headers=[*grid.names, "p_hat", "ci_lo", "ci_hi"], floatfmt=".4f")


def summarize(records: Sequence[RunRecord], crn: Crn) -> str:
    """Mean and standard deviation of the final concentrations of an ensemble."""
    finals = np.array(
        [_in_unit(r.result.sample.conc, crn) for r in records if r.result is not None]
    )
    if finals.size == 0:
        return "no run completed"
    std = finals.std(axis=0, ddof=1) if len(finals) > 1 else np.full(crn.size, math.nan)
    table = [[name, m, s] for name, m, s in zip(crn.names, finals.mean(axis=0), std)]
    return tabulate(
        table, headers=["species", f"mean ({crn.concentration_unit})", "std"], floatfmt=".6g"
    )
