import math

import numpy as np
import pytest
from scipy import stats

from src.models.pdmp import HybridPath, Mode, Pdmp, Segment
from src.services.integrator import time_tolerance
from src.services.pdmp_engine import execute, survival
from src.utils.errors import ZenoError
from src.utils.random_stream import RandomStream


def clock(_x):
    return np.array([1.0])


def to_target(q, x, cause, target, rng):
    return (1 if target is None else target), x


def waiting(rate=2.0):
    return Pdmp(
        1,
        (Mode("wait", field=clock, intensities={1: lambda _x: rate}), Mode("done")),
        to_target,
    )


def test_constant_intensity_jump_time():
    rng = RandomStream(11)
    path = execute(waiting(), 0, [0.0], 100.0, rng)
    assert [s.cause for s in path.segments] == ["jump", "horizon"]
    assert path.jumps == 1
    assert path.final_mode == 1
    expected = rng.child(0).exponential() / 2.0
    assert path.jump_times()[0] == pytest.approx(expected, abs=1e-9)
    assert path.final_state[0] == pytest.approx(expected, abs=1e-9)


def test_jump_times_are_exponential():
    times = [
        execute(waiting(), 0, [0.0], 100.0, RandomStream(3).child(i)).jump_times()[0]
        for i in range(400)
    ]
    assert stats.kstest(times, "expon", args=(0.0, 0.5)).pvalue > 1e-3


def test_target_chosen_by_intensity_weights():
    pdmp = Pdmp(
        1,
        (
            Mode("wait", field=clock, intensities={1: lambda _x: 1.0, 2: lambda _x: 3.0}),
            Mode("left"),
            Mode("right"),
        ),
        to_target,
    )
    finals = [execute(pdmp, 0, [0.0], 100.0, RandomStream(5).child(i)).final_mode for i in range(1000)]
    assert finals.count(2) / len(finals) == pytest.approx(0.75, abs=0.05)


def test_guard_forces_jump():
    pdmp = Pdmp(1, (Mode("ramp", field=clock, guard=lambda x: x[0] >= 2.5), Mode("done")), to_target)
    path = execute(pdmp, 0, [0.0], 10.0, RandomStream(0))
    first, last = path.segments
    assert first.cause == "guard"
    assert abs(first.exit_time - 2.5) <= time_tolerance(2.5)
    assert last.entry_time == first.exit_time
    assert last.exit_time == 10.0
    assert path.to_rows(pdmp.kinds)[0]["kind"] == "ramp"


def test_horizon_ends_the_path():
    pdmp = Pdmp(1, (Mode("ramp", field=clock),), to_target)
    path = execute(pdmp, 0, [1.0], 5.0, RandomStream(0))
    (segment,) = path.segments
    assert segment.cause == "horizon"
    assert segment.exit_time == 5.0
    assert segment.exit_state[0] == pytest.approx(6.0, rel=1e-12)


def test_paths_are_reproducible():
    first = execute(waiting(), 0, [0.0], 100.0, RandomStream(9))
    second = execute(waiting(), 0, [0.0], 100.0, RandomStream(9))
    np.testing.assert_array_equal(first.jump_times(), second.jump_times())


def test_zeno_execution_is_rejected():
    pdmp = Pdmp(1, (Mode("stuck", field=clock, guard=lambda _x: True),), lambda q, x, *_: (q, x))
    with pytest.raises(ZenoError):
        execute(pdmp, 0, [0.0], 1.0, RandomStream(0), max_jumps=50)


def test_survival_with_state_dependent_intensity():
    pdmp = Pdmp(1, (Mode("wait", field=clock, intensities={1: lambda x: float(x[0])}), Mode("done")), to_target)
    assert survival(pdmp, 0, [0.0], 1.0) == pytest.approx(math.exp(-0.5), rel=1e-7)
    assert survival(pdmp, 0, [0.0], 0.0) == 1.0
    assert survival(pdmp, 1, [0.0], 3.0) == 1.0


def test_survival_after_guard_is_zero():
    pdmp = Pdmp(
        1,
        (Mode("wait", field=clock, guard=lambda x: x[0] >= 1.0, intensities={1: lambda _x: 1.0}), Mode("done")),
        to_target,
    )
    assert survival(pdmp, 0, [0.0], 2.0) == 0.0
    assert survival(pdmp, 0, [0.0], 0.5) == pytest.approx(math.exp(-0.5), rel=1e-7)


@pytest.mark.parametrize(
    "modes",
    [
        (),
        (Mode("self", field=clock, intensities={0: lambda _x: 1.0}),),
        (Mode("nowhere", field=clock, intensities={3: lambda _x: 1.0}),),
    ],
)
def test_invalid_pdmp(modes):
    with pytest.raises(ValueError):
        Pdmp(1, modes, to_target)


def test_segments_must_be_contiguous():
    x = np.zeros(1)
    with pytest.raises(ValueError):
        HybridPath((Segment(0, 0.0, x, 1.0, x, "jump"), Segment(0, 2.0, x, 3.0, x, "horizon")))
