import csv
import json

import pytest
from click.testing import CliRunner

from conftest import ASSETS, TITRATION_T, titration_closed_form
from src.cli import cli
from src.config import settings
from src.models.manifest import RunManifest

TITRATION = [str(ASSETS / "titration.protocol"), str(ASSETS / "titration.crn")]
NOISE = str(ASSETS / "noise" / "titration.json")

DILUTION = """
let S = sample([A = 1 M]; 1 L; 300 K) in
let W = sample([]; 1 L; 300 K) in
let s, _ = Dispense(S, ${p}) in
Observe(Mix(s, W), 1)
"""


BIMOLECULAR = "let S = sample([A = 0.1 M, B = 0.1 M]; 1 mL; 300 K) in\nEquilibrate(S, 1 s)\n"

@pytest.fixture
def runner():
    return CliRunner()


def json_lines(output):
    return [json.loads(line) for line in output.splitlines() if line.startswith("{")]


def write(directory, name, text):
    path = directory / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_check_clean_protocol(runner):
    result = runner.invoke(cli, ["check", *TITRATION])
    assert result.exit_code == 0
    assert json_lines(result.output) == []


def test_check_reports_linearity(runner, tmp_path):
    protocol = write(tmp_path, "dup.protocol", "let A = sample([H+ = 0.1 M]; 1 mL; 300 K) in\nMix(A, A)\n")
    result = runner.invoke(cli, ["check", protocol, TITRATION[1]])
    assert result.exit_code == 1
    assert "linearity" in [d["code"] for d in json_lines(result.output)]


def test_check_reports_network_errors(runner, tmp_path):
    crn = write(tmp_path, "bad.crn", "A ->{-1} B\n")
    result = runner.invoke(cli, ["check", TITRATION[0], crn])
    assert result.exit_code == 1
    (diagnostic,) = json_lines(result.output)
    assert diagnostic["source"] == "crn"
    assert diagnostic["code"] == "parse"


def test_check_stochastic_zero_time(runner, tmp_path):
    protocol = write(
        tmp_path, "instant.protocol", "let A = sample([H+ = 0.1 M]; 1 mL; 300 K) in\nEquilibrate(A, 0 s)\n"
    )
    assert runner.invoke(cli, ["check", protocol, TITRATION[1]]).exit_code == 0
    result = runner.invoke(cli, ["check", protocol, TITRATION[1], "--mode", "stoch"])
    assert result.exit_code == 1
    assert [d["code"] for d in json_lines(result.output)] == ["nonpositive-time"]


def test_simulate_deterministic(runner, tmp_path):
    out = tmp_path / "det"
    result = runner.invoke(cli, ["simulate", *TITRATION, "--out", str(out), "--trace"])
    assert result.exit_code == 0, result.output
    final = json.loads((out / "final.json").read_text())
    assert final["sample"]["conc_M"]["H+"] == pytest.approx(titration_closed_form(TITRATION_T), rel=1e-6)
    assert final["sample"]["volume_L"] == pytest.approx(1e-3)
    assert final["elapsed_s"] == pytest.approx(TITRATION_T)
    with (out / "trace_0.csv").open() as handle:
        assert next(csv.reader(handle)) == ["time_s", "H+", "Cl-", "Na+", "OH-", "H2O"]
    manifest = RunManifest.load(out)
    assert manifest.command == "simulate"
    assert manifest.runs == 1
    assert set(manifest.inputs) == set(TITRATION)


def test_simulate_stochastic_is_reproducible_and_replayable(runner, tmp_path):
    args = ["simulate", *TITRATION, "--mode", "stoch", "--runs", "3", "--noise", NOISE, "--seed", "1", "--workers", "1"]
    first, second, replayed = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert runner.invoke(cli, [*args, "--out", str(first)]).exit_code == 0
    assert runner.invoke(cli, [*args, "--out", str(second)]).exit_code == 0
    runs = (first / "runs.csv").read_bytes()
    assert runs == (second / "runs.csv").read_bytes()
    assert len(runs.decode().splitlines()) == 4
    assert (first / "observations.csv").exists()

    result = runner.invoke(cli, ["replay", str(first / "manifest.json"), "--out", str(replayed)])
    assert result.exit_code == 0, result.output
    assert (replayed / "runs.csv").read_bytes() == runs


def test_simulate_refuses_failing_checks(runner, tmp_path):
    protocol = write(
        tmp_path, "instant.protocol", "let A = sample([H+ = 0.1 M]; 1 mL; 300 K) in\nEquilibrate(A, 0 s)\n"
    )
    result = runner.invoke(
        cli, ["simulate", protocol, TITRATION[1], "--mode", "stoch", "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 1
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_simulate_blowup_is_a_runtime_error(runner, tmp_path):
    crn = write(tmp_path, "auto.crn", "2A ->{1} 3A\n")
    protocol = write(tmp_path, "auto.protocol", "let A = sample([A = 1 M]; 1 mL; 300 K) in\nEquilibrate(A, 10 s)\n")
    result = runner.invoke(cli, ["simulate", protocol, crn, "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_estimate_plans_runs(runner, tmp_path):
    out = tmp_path / "est"
    result = runner.invoke(
        cli,
        [
            "estimate", *TITRATION,
            "--predicate", "H+ in [0, 0.1] at final",
            "--epsilon", "0.3", "--delta", "0.1",
            "--noise", NOISE, "--workers", "1", "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    estimate = json.loads((out / "estimate.json").read_text())
    assert estimate["n"] == 17
    assert estimate["p_hat"] == 1.0
    assert RunManifest.load(out).runs == 17


def test_estimate_needs_runs_or_epsilon(runner, tmp_path):
    result = runner.invoke(
        cli, ["estimate", *TITRATION, "--predicate", "H+ in [0, 1] at final", "--out", str(tmp_path)]
    )
    assert result.exit_code == 1


def test_sweep(runner, tmp_path):
    template = write(tmp_path, "dilution.protocol", DILUTION)
    crn = write(tmp_path, "water.crn", "species: A\n")
    out = tmp_path / "grid"
    result = runner.invoke(
        cli,
        [
            "sweep", template, crn,
            "--param", "p=0.3:0.6:2",
            "--predicate", "A in [0.3, 1] at obs:1",
            "--runs", "5", "--workers", "1", "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    grid = json.loads((out / "grid.json").read_text())
    assert [cell["params"]["p"] for cell in grid["cells"]] == pytest.approx([0.3, 0.6])
    assert [cell["estimate"]["p_hat"] for cell in grid["cells"]] == [0.0, 1.0]
    assert (out / "grid.csv").exists()


def test_sweep_rejects_unknown_parameter(runner, tmp_path):
    template = write(tmp_path, "dilution.protocol", DILUTION)
    crn = write(tmp_path, "water.crn", "species: A\n")
    result = runner.invoke(
        cli, ["sweep", template, crn, "--param", "q=0.3:0.6:2", "--predicate", "A in [0, 1] at final", "--out", str(tmp_path)]
    )
    assert result.exit_code == 1


def test_replay_uses_recorded_tolerances(runner, tmp_path, monkeypatch):
    protocol = write(tmp_path, "bi.protocol", BIMOLECULAR)
    crn = write(tmp_path, "bi.crn", "A + B ->{10} C\n")
    first, loose, replayed = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert runner.invoke(cli, ["simulate", protocol, crn, "--out", str(first)]).exit_code == 0

    monkeypatch.setattr(settings, "REL_TOL", 1e-3)
    monkeypatch.setattr(settings, "ABS_TOL", 1e-4)
    assert runner.invoke(cli, ["simulate", protocol, crn, "--out", str(loose)]).exit_code == 0
    assert (loose / "final.json").read_bytes() != (first / "final.json").read_bytes()

    result = runner.invoke(cli, ["replay", str(first / "manifest.json"), "--out", str(replayed)])
    assert result.exit_code == 0, result.output
    assert (replayed / "final.json").read_bytes() == (first / "final.json").read_bytes()
    assert RunManifest.load(replayed).flow == RunManifest.load(first).flow
    assert RunManifest.load(first).flow["rel_tol"] == 1e-8


@pytest.mark.parametrize(
    "option, value",
    [("--rel-tol", "-1e-6"), ("--abs-tol", "0"), ("--runs", "0"), ("--workers", "0")],
)
def test_out_of_range_numbers_are_usage_errors(runner, tmp_path, option, value):
    result = runner.invoke(
        cli, ["simulate", *TITRATION, "--mode", "stoch", option, value, "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 1
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_out_of_range_delta_is_a_usage_error(runner, tmp_path):
    result = runner.invoke(
        cli, ["estimate", *TITRATION, "--predicate", "H+ in [0, 1] at final", "--runs", "2", "--delta", "1.5", "--out", str(tmp_path)]
    )
    assert result.exit_code == 1


def test_invalid_integrator_setting_is_a_user_error(runner, tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "INTEGRATOR_METHOD", "Euler")
    result = runner.invoke(cli, ["simulate", *TITRATION, "--out", str(tmp_path / "o")])
    assert result.exit_code == 1
    assert "invalid value" in result.output
