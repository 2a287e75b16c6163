"""Shared fixtures: the networks and protocols under ``assets/``."""

from pathlib import Path

import pytest

from src.models.flow import FlowConfig
from src.services.parser import parse_crn, parse_protocol

ASSETS = Path(__file__).resolve().parent.parent / "assets"

# Acid/base titration: c(t) = c0 / (1 + k n0^2 c0 t) with Na+ = Cl- = n0.
TITRATION_K = 2.81e-10
TITRATION_C0 = 0.05
TITRATION_T = 1e4


def titration_closed_form(t: float, c0: float = TITRATION_C0, n0: float = TITRATION_C0) -> float:
    return c0 / (1.0 + TITRATION_K * n0**2 * c0 * t)


def read_asset(name: str) -> str:
    return (ASSETS / name).read_text(encoding="utf-8")


@pytest.fixture
def titration_crn():
    return parse_crn(read_asset("titration.crn"))


@pytest.fixture
def titration(titration_crn):
    return parse_protocol(read_asset("titration.protocol"), titration_crn)


@pytest.fixture
def dsd_crn():
    return parse_crn(read_asset("dsd.crn"))


@pytest.fixture
def dsd(dsd_crn):
    return parse_protocol(read_asset("dsd.protocol"), dsd_crn)


@pytest.fixture
def bimolecular_crn():
    """``A + B -> C`` fast enough to change concentrations within seconds."""
    return parse_crn("A + B ->{10} C\n")


@pytest.fixture
def cfg():
    return FlowConfig(rel_tol=1e-8, abs_tol=1e-12)
