"""Protocol abstract syntax.

Protocols are immutable trees of frozen dataclasses. Every node carries two
metadata fields that never take part in equality: the ``span`` of the text it
was parsed from and a ``node_id`` assigned in pre-order by
``syntax.number_nodes``. The stochastic evaluator derives one random stream
per node id, so structurally equal protocols with equal ids draw identically.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:[+\-](?!>))*")

KEYWORDS = frozenset(
    {"sample", "Mix", "let", "in", "Dispense", "Equilibrate", "Dispose", "Observe"}
)


@dataclass(frozen=True)
class SourceSpan:
    """Location of a piece of text.

    Attributes:
        start: Offset of the first character
        end: Offset one past the last character
        line: 1-based line of ``start``
        column: 1-based column of ``start``
        end_line: 1-based line of ``end``
        end_column: 1-based column of ``end``
    """

    start: int
    end: int
    line: int = 1
    column: int = 1
    end_line: int = 1
    end_column: int = 1

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "line": self.line,
            "column": self.column,
            "end_line": self.end_line,
            "end_column": self.end_column,
        }


def valid_variable_name(name: str) -> bool:
    return (
        isinstance(name, str)
        and IDENTIFIER.fullmatch(name) is not None
        and name not in KEYWORDS
        and name != "_"
    )


@dataclass(frozen=True)
class Node:
    """Common metadata of all protocol nodes."""

    span: Optional[SourceSpan] = field(
        default=None, compare=False, repr=False, kw_only=True
    )
    node_id: Optional[int] = field(
        default=None, compare=False, repr=False, kw_only=True
    )


@dataclass(frozen=True)
class Var(Node):
    """Reference to a let-bound sample."""

    name: str

    def __post_init__(self) -> None:
        if not valid_variable_name(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True)
class Initial(Node):
    """A sample literal.

    Attributes:
        conc: Concentrations in mol/L, ordered like the network's species
        volume: Volume (L)
        temperature: Temperature (K)
    """

    conc: Tuple[float, ...]
    volume: float
    temperature: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "conc", tuple(float(c) for c in self.conc))
        object.__setattr__(self, "volume", float(self.volume))
        object.__setattr__(self, "temperature", float(self.temperature))
        if any(not math.isfinite(c) or c < 0 for c in self.conc):
            raise ValueError("concentrations must be finite and >= 0")
        if not math.isfinite(self.volume) or self.volume < 0:
            raise ValueError(f"volume must be finite and >= 0, got {self.volume}")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ValueError(
                f"temperature must be finite and >= 0, got {self.temperature}"
            )


@dataclass(frozen=True)
class Mix(Node):
    left: "Protocol"
    right: "Protocol"


@dataclass(frozen=True)
class Let(Node):
    """``let name = bound in body``."""

    name: str
    bound: "Protocol"
    body: "Protocol"

    def __post_init__(self) -> None:
        if not valid_variable_name(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True)
class LetDispense(Node):
    """``let left, right = Dispense(source, fraction) in body``.

    ``left`` receives the share ``fraction`` of the volume and ``right`` the
    rest. ``right is None`` is the discard form written with ``_``, which
    ``syntax.desugar`` removes.
    """

    left: str
    right: Optional[str]
    source: "Protocol"
    fraction: float
    body: "Protocol"

    def __post_init__(self) -> None:
        object.__setattr__(self, "fraction", float(self.fraction))
        if not valid_variable_name(self.left):
            raise ValueError(f"invalid variable name {self.left!r}")
        if self.right is not None:
            if not valid_variable_name(self.right):
                raise ValueError(f"invalid variable name {self.right!r}")
            if self.right == self.left:
                raise ValueError(f"dispense binds {self.left!r} twice")
        if not 0.0 < self.fraction < 1.0:
            raise ValueError(
                f"dispense fraction must lie strictly between 0 and 1, got {self.fraction}"
            )


@dataclass(frozen=True)
class Equilibrate(Node):
    """Let the sample react for ``duration`` seconds."""

    sample: "Protocol"
    duration: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "duration", float(self.duration))
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ValueError(
                f"equilibrate duration must be finite and >= 0, got {self.duration}"
            )


@dataclass(frozen=True)
class Dispose(Node):
    sample: "Protocol"


@dataclass(frozen=True)
class Observe(Node):
    """Record the sample's concentrations under identifier ``idn``."""

    sample: "Protocol"
    idn: int

    def __post_init__(self) -> None:
        if isinstance(self.idn, bool) or not isinstance(self.idn, int) or self.idn < 0:
            raise ValueError(f"observation identifier must be a natural number, got {self.idn!r}")


Protocol = Union[Var, Initial, Mix, Let, LetDispense, Equilibrate, Dispose, Observe]


def children(p: Protocol) -> Tuple[Protocol, ...]:
    """Direct subprotocols in left-to-right (evaluation) order."""
    if isinstance(p, (Var, Initial)):
        return ()
    if isinstance(p, Mix):
        return (p.left, p.right)
    if isinstance(p, Let):
        return (p.bound, p.body)
    if isinstance(p, LetDispense):
        return (p.source, p.body)
    if isinstance(p, (Equilibrate, Dispose, Observe)):
        return (p.sample,)
    raise TypeError(f"not a protocol node: {type(p).__name__}")


def size(p: Protocol) -> int:
    """Number of nodes in the tree."""
    return 1 + sum(size(c) for c in children(p))


@dataclass(frozen=True)
class Hole:
    """A ``${name}`` parameter found in template text.

    Attributes:
        name: Parameter name
        slot: ``"fraction"`` (Dispense) or ``"time"`` (Equilibrate, seconds)
        span: Where the hole occurs
    """

    name: str
    slot: str
    span: Optional[SourceSpan] = field(default=None, compare=False)
