"""Physical quantities with units.

Magnitudes are kept as ``Decimal`` so that conversions between power-of-ten
units are exact up to the final rounding to ``float``: ``100 nM`` becomes the
float nearest to 1e-7 M, not ``100 * 1e-9``.
"""

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Dict, Optional

CONCENTRATION = "concentration"
VOLUME = "volume"
TEMPERATURE = "temperature"
TIME = "time"
DIMENSIONLESS = "dimensionless"

# Factor to the base unit of each dimension: mol/L, L, K, s.
UNITS: Dict[str, tuple] = {
    "M": (CONCENTRATION, Decimal("1")),
    "mM": (CONCENTRATION, Decimal("1e-3")),
    "uM": (CONCENTRATION, Decimal("1e-6")),
    "µM": (CONCENTRATION, Decimal("1e-6")),
    "nM": (CONCENTRATION, Decimal("1e-9")),
    "L": (VOLUME, Decimal("1")),
    "mL": (VOLUME, Decimal("1e-3")),
    "uL": (VOLUME, Decimal("1e-6")),
    "µL": (VOLUME, Decimal("1e-6")),
    "K": (TEMPERATURE, Decimal("1")),
    "s": (TIME, Decimal("1")),
    "min": (TIME, Decimal("60")),
    "h": (TIME, Decimal("3600")),
}

BASE_UNITS = {CONCENTRATION: "M", VOLUME: "L", TEMPERATURE: "K", TIME: "s"}


def unit_dimension(unit: str) -> str:
    if not unit:
        return DIMENSIONLESS
    try:
        return UNITS[unit][0]
    except KeyError:
        raise ValueError(f"unknown unit {unit!r}") from None


def unit_factor(unit: str) -> Decimal:
    """Factor from ``unit`` to the base unit of its dimension."""
    if not unit:
        return Decimal(1)
    try:
        return UNITS[unit][1]
    except KeyError:
        raise ValueError(f"unknown unit {unit!r}") from None


def to_decimal(text: str) -> Decimal:
    try:
        value = Decimal(text.replace("∞", "Infinity"))
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None
    if value.is_nan():
        raise ValueError(f"not a number: {text!r}")
    return value


@dataclass(frozen=True)
class Quantity:
    """A magnitude with an optional unit.

    Attributes:
        magnitude: Value as written
        unit: Unit symbol, empty for a bare number
    """

    magnitude: Decimal
    unit: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.magnitude, Decimal):
            object.__setattr__(self, "magnitude", to_decimal(str(self.magnitude)))
        unit_dimension(self.unit)

    @property
    def dimension(self) -> str:
        return unit_dimension(self.unit)

    def to_base(self, default_unit: Optional[str] = None) -> float:
        """Value in the base unit of its dimension.

        Args:
            default_unit: Unit assumed for a bare number
        """
        unit = self.unit or default_unit or ""
        return float(self.magnitude * unit_factor(unit))

    def in_slot(self, dimension: str, default_unit: str) -> float:
        """Convert for a slot of the given dimension.

        Raises:
            ValueError: If the unit belongs to another dimension
        """
        if self.unit and self.dimension != dimension:
            raise ValueError(
                f"unit {self.unit!r} is a {self.dimension} unit, expected a {dimension}"
            )
        return self.to_base(default_unit)

    def __str__(self) -> str:
        return f"{self.magnitude} {self.unit}".rstrip()


def format_quantity(value: float, dimension: str) -> str:
    """Render a base-unit value so that it parses back to the same float."""
    return f"{value!r} {BASE_UNITS[dimension]}"
