"""Hypothesis strategies for protocol trees."""

from typing import Iterator, Tuple

import numpy as np
from hypothesis import strategies as st

from src.models.protocol import (
    Dispose,
    Equilibrate,
    Initial,
    Let,
    LetDispense,
    Mix,
    Observe,
    Protocol,
    Var,
    children,
)

concentrations = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
volumes = st.floats(min_value=1e-6, max_value=1e-2)
temperatures = st.floats(min_value=273.0, max_value=373.0)
durations = st.floats(min_value=0.0, max_value=5.0)
fractions = st.floats(min_value=0.01, max_value=0.99)


# Literals spanning the whole float range, for printing and parsing.
extreme_concentrations = st.one_of(
    st.floats(min_value=0.0, max_value=1e30), st.sampled_from([1e-30, 1e30, 5e-324, 1.7976931348623157e308])
)
extreme_volumes = st.floats(min_value=1e-30, max_value=1e30)
extreme_durations = st.one_of(st.floats(min_value=0.0, max_value=1e30), st.just(1e-30))
extreme_fractions = st.floats(min_value=0.0, max_value=1.0, exclude_min=True, exclude_max=True)

NAMES = st.sampled_from(["x", "y", "z", "w"])


def initials(species: int, conc=concentrations, volume=volumes):
    return st.builds(Initial, st.tuples(*[conc] * species), volume, temperatures)


def closed_protocols(
    species: int,
    max_leaves: int = 6,
    conc=concentrations,
    volume=volumes,
    duration=durations,
    fraction=fractions,
):
    """Closed linear protocols over ``species`` species."""

    def extend(inner):
        return st.one_of(
            st.builds(Mix, inner, inner),
            st.builds(Equilibrate, inner, duration),
            st.builds(Dispose, inner),
            st.builds(Observe, inner, st.integers(0, 3)),
            st.builds(
                lambda source, f: LetDispense("x", "y", source, f, Mix(Var("x"), Var("y"))),
                inner,
                fraction,
            ),
            st.builds(
                lambda source, f: LetDispense("x", None, source, f, Var("x")),
                inner,
                fraction,
            ),
            st.builds(lambda bound, other: Let("z", bound, Mix(Var("z"), other)), inner, inner),
        )

    return st.recursive(initials(species, conc, volume), extend, max_leaves=max_leaves)


def open_protocols(species: int, max_leaves: int = 8):
    """Protocols with free variables, shadowing and repeated use."""
    dispense_names = st.tuples(NAMES, st.one_of(st.none(), NAMES)).filter(lambda pair: pair[0] != pair[1])

    def extend(inner):
        return st.one_of(
            st.builds(Mix, inner, inner),
            st.builds(Equilibrate, inner, durations),
            st.builds(Dispose, inner),
            st.builds(Observe, inner, st.integers(0, 3)),
            st.builds(Let, NAMES, inner, inner),
            st.builds(
                lambda names, source, f, body: LetDispense(names[0], names[1], source, f, body),
                dispense_names,
                inner,
                fractions,
                inner,
            ),
        )

    leaves = st.one_of(initials(species), st.builds(Var, NAMES))
    return st.recursive(leaves, extend, max_leaves=max_leaves)


def binder_paths(p: Protocol, path: Tuple[int, ...] = ()) -> Iterator[Tuple[int, ...]]:
    """Child-position paths from ``p`` to every node that binds a name."""
    if isinstance(p, (Let, LetDispense)):
        yield path
    for position, child in enumerate(children(p)):
        yield from binder_paths(child, path + (position,))


def expected_moles(p: Protocol) -> np.ndarray:
    """Amounts a protocol from ``closed_protocols`` must end with."""
    match p:
        case Initial(conc=conc, volume=volume):
            return np.asarray(conc) * volume
        case Mix(left=left, right=right):
            return expected_moles(left) + expected_moles(right)
        case Equilibrate(sample=s) | Observe(sample=s):
            return expected_moles(s)
        case Dispose(sample=s):
            return np.zeros_like(expected_moles(s))
        case LetDispense(right=None, source=source, fraction=f):
            return f * expected_moles(source)
        case LetDispense(source=source):
            return expected_moles(source)
        case Let(bound=bound, body=Mix(right=other)):
            return expected_moles(bound) + expected_moles(other)
    raise TypeError(f"unexpected node {type(p).__name__}")
