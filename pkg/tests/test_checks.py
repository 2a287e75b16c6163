import json

import pytest

from src.models.noise import DispenseNoise, NoiseConfig
from src.models.protocol import Equilibrate, Initial
from src.services.checks import check_crn, check_protocol, from_parse_error, has_errors
from src.services.parser import parse_crn, parse_protocol
from src.utils.errors import ParseError

DUPLICATE = """
let A = sample([H+ = 0.1 M]; 1 mL; 300 K) in
Mix(A, A)
"""

INSTANT = """
let A = sample([H+ = 0.1 M]; 1 mL; 300 K) in
Equilibrate(A, 0 s)
"""

GREEDY = """
let A = sample([H+ = 0.1 M]; 1 mL; 300 K) in
let a, b = Dispense(A, 0.9) in
Mix(a, b)
"""

BOUNDED = NoiseConfig(dispense=DispenseNoise(kind="truncated_gaussian", sigma_rel=0.05, bounds=(0.1, 0.8)))


def codes(diagnostics):
    return [d.code for d in diagnostics]


def test_reference_protocol_is_clean(titration, titration_crn):
    assert check_protocol(titration, titration_crn) == []
    assert check_protocol(titration, titration_crn, stochastic=True) == []
    assert check_crn(titration_crn) == []


def test_duplicate_use_is_a_linearity_error(titration_crn):
    diagnostics = check_protocol(parse_protocol(DUPLICATE, titration_crn), titration_crn)
    assert "linearity" in codes(diagnostics)
    assert has_errors(diagnostics)
    assert all(d.span is not None for d in diagnostics if d.code == "linearity")


def test_zero_equilibration_only_fails_stochastic_checks(titration_crn):
    p = parse_protocol(INSTANT, titration_crn)
    assert check_protocol(p, titration_crn) == []
    diagnostics = check_protocol(p, titration_crn, stochastic=True)
    assert codes(diagnostics) == ["nonpositive-time"]
    assert has_errors(diagnostics)


def test_fraction_outside_noise_bounds_warns(titration_crn):
    p = parse_protocol(GREEDY, titration_crn)
    assert check_protocol(p, titration_crn, stochastic=True, noise=BOUNDED)[0].code == "fraction-outside-bounds"
    assert not has_errors(check_protocol(p, titration_crn, stochastic=True, noise=BOUNDED))
    # exact dispensing has no bounds to leave
    assert check_protocol(p, titration_crn, stochastic=True) == []


def test_wrong_sample_length_is_a_shape_error(titration_crn):
    p = Equilibrate(Initial((0.1, 0.1), 1e-3, 300.0), 1.0)
    diagnostics = check_protocol(p, titration_crn)
    assert codes(diagnostics) == ["shape"]
    assert "5 species" in diagnostics[0].message


def test_autocatalysis_is_flagged():
    diagnostics = check_crn(parse_crn("2A ->{1} 3A"))
    assert codes(diagnostics) == ["superlinear-kinetics"]
    assert diagnostics[0].source == "crn"
    assert not has_errors(diagnostics)


def test_null_effect_is_flagged():
    assert codes(check_crn(parse_crn("A ->{1} A"))) == ["null-effect"]


def test_unimolecular_growth_is_not_superlinear():
    assert check_crn(parse_crn("A ->{1} 2A")) == []


def test_parse_error_becomes_a_diagnostic(titration_crn):
    text = "let A = sample([H+ = 0.1 M]; 1 mL; 300 K) in\nlet a, b = Dispense(A, 1.5) in\nMix(a, b)\n"
    with pytest.raises(ParseError) as info:
        parse_protocol(text, titration_crn)
    diagnostic = from_parse_error(info.value, "protocol")
    assert diagnostic.code == "fraction-range"
    assert diagnostic.is_error
    assert diagnostic.span.line == 2


def test_json_lines(titration_crn):
    diagnostics = check_protocol(parse_protocol(DUPLICATE, titration_crn), titration_crn)
    line = json.loads(diagnostics[0].to_json())
    assert line["severity"] == "error"
    assert line["code"] == "linearity"
    assert line["source"] == "protocol"
    assert set(line["span"]) >= {"line", "column"}
