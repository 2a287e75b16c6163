import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from src.models.crn import Crs
from src.services import kinetics
from src.utils.errors import StructuralError

concentrations = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)


def titration_conc(crn, value=0.05):
    conc = np.zeros(crn.size)
    for name in ("H+", "Cl-", "Na+", "OH-"):
        conc[crn.index_of(name)] = value
    return conc


def test_titration_propensity(titration_crn):
    reaction = titration_crn.reactions[0]
    value = kinetics.propensity(titration_crn, reaction, titration_conc(titration_crn), 298.15)
    assert value == pytest.approx(1.75625e-15, rel=1e-12)


def test_titration_drift_signs(titration_crn):
    d = kinetics.drift(titration_crn, titration_conc(titration_crn), 1e-3, 298.15)
    idx = titration_crn.index_of
    assert d[idx("H+")] == pytest.approx(-1.75625e-15, rel=1e-12)
    assert d[idx("OH-")] == d[idx("H+")]
    assert d[idx("H2O")] == -d[idx("H+")]
    assert d[idx("Na+")] == 0.0
    assert d[idx("Cl-")] == 0.0


def test_net_change(titration_crn):
    change = kinetics.net_change(titration_crn.reactions[0])
    assert change.dtype == np.int64
    assert change.tolist() == [-1, 0, 0, -1, 1]


def test_conservation_defect(titration_crn):
    spectator = np.zeros(titration_crn.size)
    spectator[titration_crn.index_of("Na+")] = 1.0
    assert kinetics.conservation_defect(titration_crn, spectator) == 0.0
    assert kinetics.conservation_defect(titration_crn, np.ones(titration_crn.size)) == 1.0


def test_roundoff_negatives_are_clamped():
    assert kinetics.clamp_concentrations([0.1, -1e-15]).tolist() == [0.1, 0.0]


def test_large_negative_rejected():
    with pytest.raises(StructuralError):
        kinetics.clamp_concentrations([0.1, -1e-6])


def test_shape_mismatch(titration_crn):
    with pytest.raises(StructuralError):
        kinetics.drift(titration_crn, [0.1, 0.1], 1e-3, 298.15)


def test_reaction_free_network_has_zero_drift():
    from src.models.crn import Crn

    crn = Crn.from_names(["A", "B"])
    assert kinetics.drift(crn, [1.0, 2.0], 1.0, 300.0).tolist() == [0.0, 0.0]


def test_unit_multipliers_match_plain_drift(dsd_crn):
    conc = np.linspace(1e-8, 5e-8, dsd_crn.size)
    plain = kinetics.drift(dsd_crn, conc, 1e-4, 298.15)
    scaled = kinetics.drift_with_multipliers(
        dsd_crn, conc, np.ones(len(dsd_crn.reactions)), 298.15
    )
    np.testing.assert_array_equal(plain, scaled)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(concentrations, min_size=5, max_size=5))
def test_titration_conserves_ions(titration_crn, values):
    d = kinetics.drift(titration_crn, values, 1e-3, 298.15)
    idx = titration_crn.index_of
    assert d[idx("Na+")] == 0.0
    assert d[idx("Cl-")] == 0.0
    assert d[idx("H+")] == d[idx("OH-")]
    assert d[idx("H+")] <= 0.0


def test_reaction_system_initial_condition(titration_crn):
    system = Crs(titration_crn, titration_conc(titration_crn))
    assert system.initial == (0.05, 0.05, 0.05, 0.05, 0.0)
    assert kinetics.drift(system.crn, system.initial, 1e-3, 298.15)[titration_crn.index_of("H2O")] > 0
    with pytest.raises(ValueError):
        Crs(titration_crn, (0.1, 0.1))
    with pytest.raises(ValueError):
        Crs(titration_crn, (0.1, 0.1, 0.1, -0.1, 0.0))
