import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import TITRATION_T, titration_closed_form
from src.models.flow import METHODS, FlowConfig
from src.services import integrator, kinetics
from src.utils.errors import IllPosedError


def constant(*values):
    velocity = np.array(values, dtype=float)
    return lambda _x: velocity


def test_quadratic_decay(cfg):
    trajectory = integrator.integrate(lambda x: -x**2, [1.0], 10.0, cfg)
    assert trajectory.end_time == 10.0
    assert trajectory.final[0] == pytest.approx(1.0 / 11.0, rel=1e-6)
    assert trajectory.state_at(1.0)[0] == pytest.approx(0.5, rel=1e-6)


@pytest.mark.parametrize("method", METHODS)
def test_every_stepper_solves_quadratic_decay(method):
    cfg = FlowConfig(rel_tol=1e-8, abs_tol=1e-12, method=method)
    trajectory = integrator.integrate(lambda x: -x**2, [1.0], 10.0, cfg)
    assert trajectory.final[0] == pytest.approx(1.0 / 11.0, rel=1e-5)


def test_titration_closed_form(titration_crn, cfg):
    x0 = np.array([0.05, 0.05, 0.05, 0.05, 0.0])
    trajectory = integrator.integrate(
        lambda x: kinetics.drift(titration_crn, x, 1e-3, 298.15),
        x0,
        TITRATION_T,
        cfg,
        nonnegative=True,
    )
    h = trajectory.final[titration_crn.index_of("H+")]
    assert h == pytest.approx(titration_closed_form(TITRATION_T), rel=1e-9)


def test_zero_duration_is_identity(cfg):
    trajectory = integrator.integrate(lambda x: -x, [2.0, 3.0], 0.0, cfg)
    assert trajectory.final.tolist() == [2.0, 3.0]
    assert trajectory.solution is None


def test_blowup_is_ill_posed(cfg):
    with pytest.raises(IllPosedError):
        integrator.integrate(lambda x: x**2, [1.0], 2.0, cfg)


def test_duration_beyond_horizon(cfg):
    with pytest.raises(IllPosedError):
        integrator.integrate(lambda x: -x, [1.0], 10.0, FlowConfig(horizon=5.0))


def test_negative_duration(cfg):
    with pytest.raises(ValueError):
        integrator.integrate(lambda x: -x, [1.0], -1.0, cfg)


def test_resampled_trajectory(cfg):
    trajectory = integrator.integrate(lambda x: -x, [1.0], 2.0, cfg).sample(5)
    assert trajectory.times.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    np.testing.assert_allclose(trajectory.states[:, 0], np.exp(-trajectory.times), rtol=1e-6)


def test_guard_time(cfg):
    result = integrator.exit_time(constant(1.0), [0.0], lambda x: x[0] >= 2.5, cfg)
    assert result.cause == "guard"
    assert result.hit
    assert abs(result.time - 2.5) <= integrator.time_tolerance(2.5)
    assert result.state[0] == pytest.approx(result.time, abs=1e-9)


def test_guard_on_curved_flow(cfg):
    # x' = -x from 1 crosses 0.25 at ln 4.
    result = integrator.exit_time(lambda x: -x, [1.0], lambda x: x[0] <= 0.25, cfg)
    assert result.time == pytest.approx(math.log(4.0), abs=1e-6)


def test_guard_holding_initially(cfg):
    result = integrator.exit_time(constant(1.0), [3.0], lambda x: x[0] >= 2.5, cfg)
    assert (result.time, result.cause) == (0.0, "guard")


def test_guard_never_fires_before_t_max(cfg):
    result = integrator.exit_time(constant(1.0), [0.0], lambda x: x[0] >= 2.5, cfg, t_max=1.0)
    assert result.cause == "horizon"
    assert not result.hit
    assert result.time == 1.0
    assert result.state[0] == pytest.approx(1.0, rel=1e-12)


def test_accumulator_level(cfg):
    result = integrator.integrate_with_accumulator(
        constant(1.0), [0.0], lambda _x: 2.0, 3.0, cfg
    )
    assert result.cause == "level"
    assert result.time == pytest.approx(1.5, abs=1e-9)
    assert result.accumulated == pytest.approx(3.0, abs=1e-9)
    assert result.trajectory.state_at(result.time).shape == (1,)


def test_accumulator_follows_state(cfg):
    # Intensity x along x' = 1 from 0 accumulates t^2 / 2.
    result = integrator.integrate_with_accumulator(
        constant(1.0), [0.0], lambda x: float(x[0]), 2.0, cfg
    )
    assert result.time == pytest.approx(2.0, abs=1e-8)


def test_earlier_event_wins(cfg):
    result = integrator.flow_until(
        constant(1.0),
        [0.0],
        cfg,
        guard=lambda x: x[0] >= 1.0,
        aux_drift=lambda _x: 1.0,
        stop_level=0.5,
    )
    assert result.cause == "level"
    assert result.time == pytest.approx(0.5, abs=1e-9)


def test_unbounded_flow_is_rejected(cfg):
    with pytest.raises(ValueError):
        integrator.flow_until(constant(1.0), [0.0], cfg)


def test_stiff_relaxation_within_step_budget():
    # relaxation time 1e-6 s observed over 1e3 s
    relax = lambda x: -1e6 * (x - 1.0)
    cfg = FlowConfig(max_steps=20_000)
    trajectory = integrator.integrate(relax, [0.0], 1e3, cfg)
    assert trajectory.final[0] == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(IllPosedError, match="20000 steps"):
        integrator.integrate(relax, [0.0], 1e3, replace(cfg, method="RK45"))


def test_guard_that_never_fires_exhausts_step_budget():
    rotation = lambda x: np.array([-x[1], x[0]])
    with pytest.raises(IllPosedError, match="200 steps"):
        integrator.exit_time(rotation, [1.0, 0.0], lambda x: x[0] > 2.0, FlowConfig(max_steps=200))


def test_depletion_stays_nonnegative():
    # A + B -> C at k = 1e3 with A = B = 1: A(t) = 1 / (1 + 1e3 t)
    seen = []

    def field(x):
        seen.append(x.min())
        return np.array([-1e3 * x[0] * x[1], -1e3 * x[0] * x[1], 1e3 * x[0] * x[1]])

    trajectory = integrator.integrate(field, [1.0, 1.0, 0.0], 100.0, FlowConfig(abs_tol=1e-12), nonnegative=True)
    assert min(seen) >= 0.0
    assert trajectory.states.min() >= 0.0
    assert trajectory.final[0] == pytest.approx(1.0 / (1.0 + 1e5), rel=1e-4)


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(method="Euler")
    with pytest.raises(ValueError):
        FlowConfig(max_steps=0)
    cfg = FlowConfig(method="BDF", max_steps=10, horizon=5.0)
    assert FlowConfig.from_dict(cfg.to_dict()) == cfg
