"""Ensembles and sweeps on the strand displacement AND gate under ``assets/``."""

import csv
import os

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import ASSETS, read_asset
from src.cli import cli
from src.cli.export import write_grid
from src.models.flow import FlowConfig
from src.models.noise import NoiseConfig
from src.models.smc import Axis
from src.services import smc
from src.services.parser import parse_predicate, parse_template

DSD = [str(ASSETS / "dsd.protocol"), str(ASSETS / "dsd.crn")]
SEEDS = (0, 1, 2)
WORKERS = str(min(4, os.cpu_count() or 1))
RUNS = 1500


def final_output(runner, tmp_path, noise, seed):
    out = tmp_path / f"{noise}-{seed}"
    result = runner.invoke(
        cli,
        [
            "simulate", *DSD, "--mode", "stoch", "--runs", str(RUNS), "--noise", noise,
            "--seed", str(seed), "--workers", WORKERS, "--on-error", "skip", "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    with (out / "runs.csv").open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = list(reader)
    assert header == [
        "run_index", "seed", "Output", "Gate_B", "Gate", "Input1",
        "Intermediate", "Waste1", "Input2", "Waste2", "elapsed_s",
    ]
    assert len(rows) >= RUNS - 10
    indices = [int(row[0]) for row in rows]
    assert indices == sorted(set(indices))
    assert {int(row[1]) for row in rows} == {seed}
    values = np.array([[float(v) for v in row[2:]] for row in rows])
    assert np.all(values >= 0.0)
    return values[:, header.index("Output") - 2]


def connected(cells):
    """True when the grid cells touch each other, diagonals included."""
    start = next(iter(cells))
    seen, frontier = {start}, [start]
    while frontier:
        row, col = frontier.pop()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                cell = (row + dr, col + dc)
                if cell in cells and cell not in seen:
                    seen.add(cell)
                    frontier.append(cell)
    return seen == cells


@pytest.mark.slow
@pytest.mark.parametrize("seed", SEEDS)
def test_both_noise_sources_add_output_variance(tmp_path, seed):
    runner = CliRunner()
    variance = {
        noise: float(np.var(final_output(runner, tmp_path, noise, seed), ddof=1))
        for noise in ("protocol_only", "rates_only", "both")
    }
    assert variance["both"] > variance["protocol_only"]
    assert variance["both"] > variance["rates_only"]


@pytest.mark.slow
@pytest.mark.parametrize("seed", SEEDS)
def test_input_fraction_sweep_has_a_band_of_optima(dsd_crn, tmp_path, seed):
    template = parse_template(read_asset("dsd_sweep.protocol"), dsd_crn)
    axes = [Axis.parse("p3=0.45:0.65:5"), Axis.parse("p4=0.45:0.65:5")]
    pred = parse_predicate("Output in [21.2, 22.5] at obs:1", dsd_crn)
    noise = NoiseConfig.load(ASSETS / "noise" / "sweep.json")
    cfg = FlowConfig().scaled(dsd_crn.unit_scale)
    grid = smc.sweep(template, axes, pred, 500, 0.01, noise, seed=seed, cfg=cfg, workers=int(WORKERS))

    assert grid.shape == (5, 5)
    best = {divmod(cell.index, 5) for cell in grid.argmax()}
    assert len(best) >= 2
    assert len({row for row, _ in best}) >= 2
    assert connected(best)

    write_grid(tmp_path / "grid.csv", grid)
    with (tmp_path / "grid.csv").open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["p3", "p4", "p_hat", "ci_lo", "ci_hi", "n"]
    assert len(rows) == 26
    for row in rows[1:]:
        assert 0.0 <= float(row[3]) <= float(row[2]) <= float(row[4]) <= 1.0
