"""Chemical reaction network data models.

A network is an ordered list of species plus a list of mass-action reactions.
Stoichiometry is stored as integer tuples aligned with the species ordering,
and rate constants are always in mol/L and seconds; the unit the network was
written in is kept only for presentation and for interpreting bare numbers.
"""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from src.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class Species:
    """A chemical species and its position in the network ordering.

    Attributes:
        name: Identifier, unique within a network
        index: Position in the species ordering
    """

    name: str
    index: int

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("species name must be a non-empty string")
        if self.index < 0:
            raise ValueError(f"species index must be >= 0, got {self.index}")


@dataclass(frozen=True)
class Reaction:
    """A mass-action reaction ``source ->{rate} product``.

    Attributes:
        source: Reactant stoichiometry, one entry per species
        product: Product stoichiometry, one entry per species
        rate: Rate constant in mol/L and seconds, scaled by reaction order
    """

    source: Tuple[int, ...]
    product: Tuple[int, ...]
    rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "source", tuple(int(v) for v in self.source))
        object.__setattr__(self, "product", tuple(int(v) for v in self.product))
        object.__setattr__(self, "rate", float(self.rate))
        if len(self.source) != len(self.product):
            raise ValueError(
                f"source and product have different lengths "
                f"({len(self.source)} vs {len(self.product)})"
            )
        if any(v < 0 for v in self.source + self.product):
            raise ValueError("stoichiometric coefficients must be natural numbers")
        if not math.isfinite(self.rate) or self.rate <= 0:
            raise ValueError(f"rate must be a positive finite number, got {self.rate}")

    @property
    def order(self) -> int:
        """Total molecularity of the source complex."""
        return sum(self.source)

    @property
    def is_null_effect(self) -> bool:
        """True when the reaction leaves every concentration unchanged."""
        return self.source == self.product


@dataclass(frozen=True)
class Crn:
    """A chemical reaction network.

    Attributes:
        species: Ordered species list
        reactions: Reactions over that ordering
        concentration_unit: Unit the network was written in
        unit_scale: mol/L per declared concentration unit
        time_unit: Time unit the network was written in
        time_scale: Seconds per declared time unit
    """

    species: Tuple[Species, ...]
    reactions: Tuple[Reaction, ...] = ()
    concentration_unit: str = "M"
    unit_scale: float = 1.0
    time_unit: str = "s"
    time_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))

        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ValueError(f"species names must be unique: {names}")
        for position, species in enumerate(self.species):
            if species.index != position:
                raise ValueError(
                    f"species {species.name!r} has index {species.index}, "
                    f"expected {position}"
                )
        for reaction in self.reactions:
            if len(reaction.source) != len(self.species):
                raise ValueError(
                    f"reaction dimension {len(reaction.source)} does not match "
                    f"{len(self.species)} species"
                )
            if reaction.is_null_effect:
                logger.warning(f"Null-effect reaction accepted: {self.describe(reaction)}")
        if self.unit_scale <= 0 or self.time_scale <= 0:
            raise ValueError("unit_scale and time_scale must be positive")

    @classmethod
    def from_names(
        cls,
        names: Sequence[str],
        reactions: Iterable[Reaction] = (),
        concentration_unit: str = "M",
        unit_scale: float = 1.0,
        time_unit: str = "s",
        time_scale: float = 1.0,
    ) -> "Crn":
        """Build a network from a plain list of species names."""
        species = tuple(Species(name, i) for i, name in enumerate(names))
        return cls(
            species, tuple(reactions), concentration_unit, unit_scale, time_unit, time_scale
        )

    @property
    def size(self) -> int:
        return len(self.species)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.species)

    @cached_property
    def _index(self) -> Dict[str, int]:
        return {s.name: s.index for s in self.species}

    def index_of(self, name: str) -> int:
        """Return the position of a species.

        Raises:
            KeyError: If the species is not part of the network
        """
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown species {name!r}") from None

    @cached_property
    def source_matrix(self) -> np.ndarray:
        """Reactant stoichiometry, shape (reactions, species)."""
        return np.array([r.source for r in self.reactions], dtype=float).reshape(
            len(self.reactions), self.size
        )

    @cached_property
    def net_matrix(self) -> np.ndarray:
        """Net change per reaction, shape (reactions, species)."""
        return np.array(
            [np.subtract(r.product, r.source) for r in self.reactions], dtype=float
        ).reshape(len(self.reactions), self.size)

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([r.rate for r in self.reactions], dtype=float)

    def rate_factor(self, reaction: Reaction) -> float:
        """Internal rate per declared rate: ``scale ** (1 - order) / time_scale``."""
        return self.unit_scale ** (1 - reaction.order) / self.time_scale

    def declared_rates(self) -> np.ndarray:
        """Rate constants in the units the network was written in."""
        return np.array([r.rate / self.rate_factor(r) for r in self.reactions], dtype=float)

    def with_rates(self, rates: Sequence[float]) -> "Crn":
        """Return a copy of the network with replaced rate constants."""
        if len(rates) != len(self.reactions):
            raise ValueError(f"expected {len(self.reactions)} rates, got {len(rates)}")
        reactions = tuple(
            replace(reaction, rate=float(rate))
            for reaction, rate in zip(self.reactions, rates)
        )
        return replace(self, reactions=reactions)

    def describe(self, reaction: Reaction) -> str:
        """Render a reaction in the text notation used by CRN files."""

        def complex_text(vector: Tuple[int, ...]) -> str:
            terms = []
            for s, coeff in zip(self.species, vector):
                if coeff == 1:
                    terms.append(s.name)
                elif coeff > 1:
                    terms.append(f"{coeff}{s.name}")
            return " + ".join(terms) if terms else "0"

        return f"{complex_text(reaction.source)} ->{{{reaction.rate!r}}} {complex_text(reaction.product)}"


@dataclass(frozen=True)
class Crs:
    """A network together with an initial concentration vector (mol/L).

    Attributes:
        crn: The reaction network
        initial: Initial concentrations, one entry per species
    """

    crn: Crn
    initial: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        if len(self.initial) != self.crn.size:
            raise ValueError(
                f"initial condition has {len(self.initial)} entries, "
                f"network has {self.crn.size} species"
            )
        if any(v < 0 or not math.isfinite(v) for v in self.initial):
            raise ValueError("initial concentrations must be finite and >= 0")
