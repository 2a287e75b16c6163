"""Text formats: protocols, reaction networks and predicates.

Protocol grammar::

    expr := IDENT
          | "sample" "(" "[" entries "]" ";" quantity ";" quantity ")"
          | "Mix" "(" expr "," expr ")"
          | "let" IDENT "=" expr "in" expr
          | "let" IDENT "," (IDENT | "_") "=" "Dispense" "(" expr "," fraction ")" "in" expr
          | "Equilibrate" "(" expr "," duration ")"
          | "Dispose" "(" expr ")"
          | "Observe" "(" expr "," NAT ")"

Sample entries are either ``name = quantity`` pairs or a full vector of
quantities. Bare concentration numbers use the network's declared unit,
bare volumes litres, bare temperatures kelvin and bare durations seconds.
In templates a fraction or duration may be a ``${name}`` parameter.
``#`` starts a comment.

Network files hold one reaction per line, ``2A + B ->{0.0003} C`` or
``A <->{kf}{kr} B``, plus optional ``units: nM, s`` and ``species: A, B``
directives before the first reaction.
"""

import bisect
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from src.models.crn import Crn, Reaction
from src.models.protocol import (
    KEYWORDS,
    Dispose,
    Equilibrate,
    Hole,
    Initial,
    Let,
    LetDispense,
    Mix,
    Observe,
    Protocol,
    SourceSpan,
    Var,
)
from src.models.quantity import (
    CONCENTRATION,
    TEMPERATURE,
    TIME,
    VOLUME,
    Quantity,
    format_quantity,
    to_decimal,
    unit_dimension,
    unit_factor,
    UNITS,
)
from src.models.smc import Predicate
from src.utils.errors import HoleError, ParseError
from src.utils.logging import get_logger

logger = get_logger(__name__)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<hole>\$\{[A-Za-z_][A-Za-z0-9_]*\})
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>(?:µ|[A-Za-z_])[A-Za-z0-9_]*(?:[+\-](?!>))*)
  | (?P<punct>[()\[\],;=])
    """,
    re.VERBOSE,
)

# Placeholder values used while collecting template parameters.
_PLACEHOLDER = {"fraction": 0.5, "time": 1.0}


class _Locator:
    """Offset to line/column conversion for one text."""

    def __init__(self, text: str) -> None:
        self._starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def span(self, start: int, end: int) -> SourceSpan:
        line = bisect.bisect_right(self._starts, start)
        end_line = bisect.bisect_right(self._starts, end)
        return SourceSpan(
            start,
            end,
            line,
            start - self._starts[line - 1] + 1,
            end_line,
            end - self._starts[end_line - 1] + 1,
        )


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int


def tokenize(text: str) -> List[Token]:
    """Split protocol text into tokens.

    Raises:
        ParseError: On a character no token can start with
    """
    locator = _Locator(text)
    tokens: List[Token] = []
    position = 0
    while position < len(text):
        match = _TOKEN.match(text, position)
        if match is None:
            raise ParseError(
                f"unexpected character {text[position]!r}",
                locator.span(position, position + 1),
            )
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, match.group(), match.start(), match.end()))
        position = match.end()
    tokens.append(Token("eof", "", len(text), len(text)))
    return tokens


class _ProtocolParser:
    """Recursive descent over the token list."""

    def __init__(
        self,
        text: str,
        crn: Crn,
        params: Optional[Mapping[str, float]] = None,
        collect_holes: bool = False,
    ) -> None:
        self.text = text
        self.crn = crn
        self.params = params
        self.collect_holes = collect_holes
        self.holes: List[Hole] = []
        self.locator = _Locator(text)
        self.tokens = tokenize(text)
        self.position = 0

    # token helpers

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def span_of(self, token: Token) -> SourceSpan:
        return self.locator.span(token.start, token.end)

    def span_from(self, first: Token) -> SourceSpan:
        last = self.tokens[self.position - 1] if self.position else first
        return self.locator.span(first.start, max(first.end, last.end))

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.current
        if token.kind == "eof":
            message = f"{message}, found end of input"
        else:
            message = f"{message}, found {token.text!r}"
        return ParseError(message, self.span_of(token))

    def advance(self) -> Token:
        token = self.current
        if token.kind != "eof":
            self.position += 1
        return token

    def expect(self, text: str) -> Token:
        if self.current.text != text or self.current.kind not in ("punct", "ident"):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_name(self) -> Token:
        token = self.current
        if token.kind != "ident" or token.text in KEYWORDS or token.text == "_":
            raise self.error("expected a variable name")
        return self.advance()

    def build(self, node_type, first: Token, *args) -> Protocol:
        try:
            return node_type(*args, span=self.span_from(first))
        except ValueError as e:
            raise ParseError(str(e), self.span_from(first)) from None

    # grammar

    def parse(self) -> Protocol:
        node = self.expr()
        if self.current.kind != "eof":
            raise self.error("expected end of input")
        return node

    def expr(self) -> Protocol:
        token = self.current
        if token.kind == "hole":
            raise self.hole_misuse(token, "a protocol")
        if token.kind != "ident":
            raise self.error("expected a protocol")
        keyword = token.text
        if keyword == "sample":
            return self.sample()
        if keyword == "Mix":
            self.advance()
            self.expect("(")
            left = self.expr()
            self.expect(",")
            right = self.expr()
            self.expect(")")
            return self.build(Mix, token, left, right)
        if keyword == "let":
            return self.let()
        if keyword == "Equilibrate":
            self.advance()
            self.expect("(")
            inner = self.expr()
            self.expect(",")
            duration = self.duration()
            self.expect(")")
            return self.build(Equilibrate, token, inner, duration)
        if keyword == "Dispose":
            self.advance()
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return self.build(Dispose, token, inner)
        if keyword == "Observe":
            self.advance()
            self.expect("(")
            inner = self.expr()
            self.expect(",")
            idn = self.current
            if idn.kind != "number" or not idn.text.isdigit():
                if idn.kind == "hole":
                    raise self.hole_misuse(idn, "an observation identifier")
                raise self.error("expected a natural number")
            self.advance()
            self.expect(")")
            return self.build(Observe, token, inner, int(idn.text))
        if keyword in KEYWORDS or keyword == "_":
            raise self.error("expected a protocol")
        self.advance()
        return self.build(Var, token, keyword)

    def let(self) -> Protocol:
        first = self.advance()
        name = self.expect_name()
        if self.current.text == ",":
            self.advance()
            other = self.current
            if other.kind == "ident" and other.text == "_":
                self.advance()
                right = None
            else:
                right = self.expect_name().text
            self.expect("=")
            self.expect("Dispense")
            self.expect("(")
            source = self.expr()
            self.expect(",")
            fraction = self.fraction()
            self.expect(")")
            self.expect("in")
            body = self.expr()
            return self.build(LetDispense, first, name.text, right, source, fraction, body)
        self.expect("=")
        bound = self.expr()
        self.expect("in")
        body = self.expr()
        return self.build(Let, first, name.text, bound, body)

    def sample(self) -> Protocol:
        first = self.advance()
        self.expect("(")
        conc = self.entries()
        self.expect(";")
        volume = self.quantity(VOLUME, "L")
        self.expect(";")
        temperature = self.quantity(TEMPERATURE, "K")
        self.expect(")")
        return self.build(Initial, first, conc, volume, temperature)

    def entries(self) -> Tuple[float, ...]:
        self.expect("[")
        conc = [0.0] * self.crn.size
        if self.current.text == "]":
            self.advance()
            return tuple(conc)
        unit = self.crn.concentration_unit
        named = self.current.kind == "ident" and self.tokens[self.position + 1].text == "="
        seen: Dict[str, Token] = {}
        values: List[float] = []
        while True:
            if named:
                species = self.current
                if species.kind != "ident":
                    raise self.error("expected a species name")
                self.advance()
                try:
                    index = self.crn.index_of(species.text)
                except KeyError:
                    raise ParseError(f"unknown species {species.text!r}", self.span_of(species)) from None
                if species.text in seen:
                    raise ParseError(f"species {species.text!r} given twice", self.span_of(species))
                seen[species.text] = species
                self.expect("=")
                conc[index] = self.quantity(CONCENTRATION, unit)
            else:
                values.append(self.quantity(CONCENTRATION, unit))
            if self.current.text == ",":
                self.advance()
                continue
            break
        closing = self.expect("]")
        if named:
            return tuple(conc)
        if len(values) != self.crn.size:
            raise ParseError(
                f"sample vector has {len(values)} entries, the network has {self.crn.size} species",
                self.span_of(closing),
            )
        return tuple(values)

    def quantity(self, dimension: str, default_unit: str) -> float:
        number = self.current
        if number.kind == "hole":
            raise self.hole_misuse(number, f"a {dimension}")
        if number.kind != "number":
            raise self.error(f"expected a {dimension}")
        self.advance()
        unit = ""
        if self.current.kind == "ident":
            if self.current.text not in UNITS:
                raise self.error(f"expected a {dimension} unit")
            unit = self.advance().text
        span = self.locator.span(number.start, self.tokens[self.position - 1].end)
        try:
            value = Quantity(to_decimal(number.text), unit).in_slot(dimension, default_unit)
        except ValueError as e:
            raise ParseError(f"unit mismatch: {e}", span) from None
        return value

    def fraction(self) -> float:
        token = self.current
        if token.kind == "hole":
            self.advance()
            return self.hole_value(token, "fraction")
        if token.kind != "number":
            raise self.error("expected a dispense fraction")
        self.advance()
        value = float(to_decimal(token.text))
        if not 0.0 < value < 1.0:
            raise ParseError(
                f"dispense fraction must lie strictly between 0 and 1, got {token.text}",
                self.span_of(token),
                code="fraction-range",
            )
        return value

    def duration(self) -> float:
        token = self.current
        if token.kind != "hole":
            return self.quantity(TIME, "s")
        self.advance()
        seconds = self.hole_value(token, "time")
        if self.current.kind == "ident" and self.current.text in UNITS:
            unit = self.advance()
            if unit_dimension(unit.text) != TIME:
                raise ParseError(f"unit mismatch: {unit.text!r} is not a time unit", self.span_of(unit))
            seconds = float(Decimal(repr(seconds)) * unit_factor(unit.text))
        return seconds

    # template parameters

    def hole_value(self, token: Token, slot: str) -> float:
        name = token.text[2:-1]
        span = self.span_of(token)
        for hole in self.holes:
            if hole.name == name and hole.slot != slot:
                raise HoleError(
                    f"parameter {name!r} is used both as a {hole.slot} and as a {slot}"
                )
        self.holes.append(Hole(name, slot, span))
        if self.collect_holes:
            return _PLACEHOLDER[slot]
        if self.params is None or name not in self.params:
            raise HoleError(f"template parameter {name!r} has no value")
        value = float(self.params[name])
        if slot == "fraction" and not 0.0 < value < 1.0:
            raise HoleError(f"parameter {name!r} = {value!r} is not a dispense fraction in (0, 1)")
        if slot == "time" and not value >= 0.0:
            raise HoleError(f"parameter {name!r} = {value!r} is not a duration >= 0")
        return value

    def hole_misuse(self, token: Token, slot: str) -> HoleError:
        span = self.span_of(token)
        return HoleError(
            f"parameter {token.text} stands for {slot} at line {span.line}, column {span.column}; "
            f"parameters may only stand for dispense fractions or equilibrate times"
        )


def parse_protocol(
    text: str, crn: Crn, params: Optional[Mapping[str, float]] = None
) -> Protocol:
    """Parse protocol text against a network's species ordering.

    Args:
        text: Protocol source
        crn: Network naming the species of sample literals
        params: Values for ``${name}`` parameters, if the text has any

    Returns:
        Protocol: The syntax tree with spans; discard forms are kept

    Raises:
        ParseError: On syntax errors, unknown species, unit mismatches and
            fractions outside (0, 1)
        HoleError: On parameters without a value or in a forbidden slot
    """
    return _ProtocolParser(text, crn, params).parse()


@dataclass(frozen=True)
class ProtocolTemplate:
    """Protocol text with ``${name}`` parameters.

    Attributes:
        text: Template source
        crn: Network the template refers to
        holes: Parameters in order of appearance
    """

    text: str
    crn: Crn
    holes: Tuple[Hole, ...]

    @property
    def parameters(self) -> Dict[str, str]:
        """Parameter name to slot kind."""
        return {hole.name: hole.slot for hole in self.holes}

    def check_parameters(self, names: Sequence[str]) -> None:
        """Raise unless ``names`` covers exactly the template's parameters.

        Raises:
            HoleError: On a parameter left without a value, or an unknown name
        """
        unbound = [name for name in self.parameters if name not in names]
        unknown = [name for name in names if name not in self.parameters]
        if unbound:
            raise HoleError(f"no values given for parameter(s) {', '.join(unbound)}")
        if unknown:
            raise HoleError(f"template has no parameter(s) {', '.join(unknown)}")
        if len(set(names)) != len(names):
            raise HoleError(f"parameter given twice in {list(names)}")

    def instantiate(self, params: Mapping[str, float]) -> Protocol:
        """Parse the template with every parameter bound.

        Raises:
            HoleError: On missing, unknown or out-of-range parameters
        """
        unknown = sorted(set(params) - set(self.parameters))
        if unknown:
            raise HoleError(f"template has no parameter(s) {', '.join(unknown)}")
        return parse_protocol(self.text, self.crn, params)


def parse_template(text: str, crn: Crn) -> ProtocolTemplate:
    """Parse a template once to check its syntax and collect its parameters."""
    parser = _ProtocolParser(text, crn, collect_holes=True)
    parser.parse()
    seen = set()
    holes = []
    for hole in parser.holes:
        if hole.name not in seen:
            seen.add(hole.name)
            holes.append(hole)
    return ProtocolTemplate(text, crn, tuple(holes))


def parse_quantity(text: str) -> Quantity:
    """Parse ``"<number> [unit]"``, for example ``"12.5 mL"``.

    Raises:
        ParseError: On malformed numbers or unknown units
    """
    parts = text.split()
    if not 1 <= len(parts) <= 2:
        raise ParseError(f"expected a number and an optional unit, got {text!r}")
    try:
        return Quantity(to_decimal(parts[0]), parts[1] if len(parts) == 2 else "")
    except ValueError as e:
        raise ParseError(str(e)) from None


def pretty_print(p: Protocol, crn: Optional[Crn] = None) -> str:
    """Canonical text of a protocol.

    Quantities are written in base units with ``repr`` of their float value,
    so parsing the output gives back an equal tree. With a network, sample
    literals name their nonzero species; without one they are full vectors.
    """

    def conc_text(conc: Sequence[float]) -> str:
        if crn is None:
            return ", ".join(format_quantity(c, CONCENTRATION) for c in conc)
        return ", ".join(
            f"{name} = {format_quantity(c, CONCENTRATION)}"
            for name, c in zip(crn.names, conc)
            if c != 0.0
        )

    def go(node: Protocol, indent: str) -> str:
        match node:
            case Var(name=name):
                return name
            case Initial(conc=conc, volume=volume, temperature=temperature):
                return (
                    f"sample([{conc_text(conc)}]; {format_quantity(volume, VOLUME)}; "
                    f"{format_quantity(temperature, TEMPERATURE)})"
                )
            case Mix(left=left, right=right):
                return f"Mix({go(left, indent)}, {go(right, indent)})"
            case Let(name=name, bound=bound, body=body):
                return f"let {name} = {go(bound, indent + '  ')} in\n{indent}{go(body, indent)}"
            case LetDispense(left=left, right=right, source=source, fraction=fraction, body=body):
                return (
                    f"let {left}, {right or '_'} = Dispense({go(source, indent + '  ')}, {fraction!r}) in\n"
                    f"{indent}{go(body, indent)}"
                )
            case Equilibrate(sample=s, duration=duration):
                return f"Equilibrate({go(s, indent)}, {format_quantity(duration, TIME)})"
            case Dispose(sample=s):
                return f"Dispose({go(s, indent)})"
            case Observe(sample=s, idn=idn):
                return f"Observe({go(s, indent)}, {idn})"
        raise TypeError(f"not a protocol node: {type(node).__name__}")

    return go(p, "")


# Reaction networks

_REACTION = re.compile(
    r"^(?P<lhs>.*?)\s*(?P<arrow><->|->)\s*\{(?P<k1>[^{}]*)\}\s*(?:\{(?P<k2>[^{}]*)\})?\s*(?P<rhs>.*?)\s*$"
)
_TERM = re.compile(r"^(?P<coeff>\d+)?\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*(?:[+\-])*)$")
_PLUS = re.compile(r"\s+\+\s+")
_DIRECTIVE = re.compile(r"^(?P<key>[A-Za-z_]+)\s*:\s*(?P<value>.*?)\s*$")

TIME_UNITS = {"s": Decimal(1), "min": Decimal(60), "h": Decimal(3600)}


def _parse_complex(
    text: str, line_span: SourceSpan, order: List[str]
) -> Dict[str, int]:
    """Species to coefficient for one side of a reaction."""
    text = text.strip()
    if text in ("", "0", "∅"):
        return {}
    stoichiometry: Dict[str, int] = {}
    for term in _PLUS.split(text):
        match = _TERM.match(term.strip())
        if match is None:
            raise ParseError(f"malformed stoichiometry {term.strip()!r}", line_span)
        coeff = int(match.group("coeff") or 1)
        name = match.group("name")
        if coeff == 0:
            raise ParseError(f"zero coefficient for {name!r}", line_span)
        if name in stoichiometry:
            logger.warning(
                f"Species {name!r} appears twice in {text!r}; merging coefficients "
                f"(line {line_span.line})"
            )
        stoichiometry[name] = stoichiometry.get(name, 0) + coeff
        if name not in order:
            order.append(name)
    return stoichiometry


def _parse_rate(text: str, span: SourceSpan) -> Decimal:
    try:
        rate = to_decimal(text.strip())
    except ValueError:
        raise ParseError(f"rate {text.strip()!r} is not a number", span) from None
    if not rate.is_finite() or rate <= 0:
        raise ParseError(f"rate must be positive and finite, got {text.strip()}", span)
    return rate


def parse_crn(text: str) -> Crn:
    """Parse a reaction network.

    Rate constants are written in the declared units and converted to mol/L
    and seconds according to the order of their reaction.

    Raises:
        ParseError: On malformed stoichiometry, nonpositive rates and bad
            directives
    """
    locator = _Locator(text)
    unit, time_unit = "M", "s"
    order: List[str] = []
    raw: List[Tuple[Dict[str, int], Dict[str, int], Decimal, SourceSpan]] = []
    seen_directives = set()

    offset = 0
    for line in text.split("\n"):
        start = offset
        offset += len(line) + 1
        content = line.split("#", 1)[0]
        stripped = content.strip()
        if not stripped:
            continue
        lead = start + len(content) - len(content.lstrip())
        span = locator.span(lead, lead + len(stripped))

        directive = _DIRECTIVE.match(stripped)
        if directive and "->" not in stripped:
            key = directive.group("key")
            value = directive.group("value")
            if key in seen_directives:
                raise ParseError(f"duplicate {key!r} directive", span)
            seen_directives.add(key)
            if raw:
                raise ParseError(f"{key!r} directive must come before the first reaction", span)
            if key == "units":
                parts = [part.strip() for part in value.split(",")]
                if len(parts) != 2:
                    raise ParseError("units directive must look like 'units: nM, s'", span)
                unit, time_unit = parts
                if unit not in UNITS or unit_dimension(unit) != CONCENTRATION:
                    raise ParseError(f"unknown concentration unit {unit!r}", span)
                if time_unit not in TIME_UNITS:
                    raise ParseError(f"unknown time unit {time_unit!r}", span)
            elif key == "species":
                for name in (part.strip() for part in value.split(",")):
                    if not _TERM.match(name) or _TERM.match(name).group("coeff"):
                        raise ParseError(f"invalid species name {name!r}", span)
                    if name in order:
                        raise ParseError(f"species {name!r} declared twice", span)
                    order.append(name)
            else:
                raise ParseError(f"unknown directive {key!r}", span)
            continue

        match = _REACTION.match(stripped)
        if match is None:
            raise ParseError("expected a reaction such as 'A + B ->{0.1} C'", span)
        arrow, k1, k2 = match.group("arrow"), match.group("k1"), match.group("k2")
        if arrow == "->" and k2 is not None:
            raise ParseError("an irreversible reaction takes one rate", span)
        if arrow == "<->" and k2 is None:
            raise ParseError("a reversible reaction takes two rates, '<->{kf}{kr}'", span)
        lhs = _parse_complex(match.group("lhs"), span, order)
        rhs = _parse_complex(match.group("rhs"), span, order)
        raw.append((lhs, rhs, _parse_rate(k1, span), span))
        if arrow == "<->":
            raw.append((rhs, lhs, _parse_rate(k2, span), span))

    scale = unit_factor(unit)
    per_second = TIME_UNITS[time_unit]
    reactions = []
    for lhs, rhs, rate, span in raw:
        source = tuple(lhs.get(name, 0) for name in order)
        product = tuple(rhs.get(name, 0) for name in order)
        reaction_order = sum(source)
        converted = rate * scale ** (1 - reaction_order) / per_second
        try:
            reactions.append(Reaction(source, product, float(converted)))
        except ValueError as e:
            raise ParseError(str(e), span) from None
    logger.debug(f"Parsed network with {len(order)} species and {len(reactions)} reactions")
    return Crn.from_names(order, reactions, unit, float(scale), time_unit, float(per_second))


# Predicates

_PREDICATE = re.compile(
    r"^\s*(?P<species>\S+)\s+in\s+\[(?P<lo>[^,\]]+),(?P<hi>[^\]]+)\]\s+at\s+(?P<at>final|obs\s*:\s*\d+)\s*$"
)


def parse_predicate(text: str, crn: Crn) -> Predicate:
    """Parse ``"<species> in [lo, hi] at final"`` or ``"... at obs:<idn>"``.

    Bounds may carry a concentration unit; bare numbers use the network's
    declared unit. ``inf`` is accepted as an upper bound.

    Raises:
        ParseError: On malformed text or unknown species
    """
    match = _PREDICATE.match(text)
    if match is None:
        raise ParseError(f"predicate must look like 'X in [lo, hi] at final', got {text!r}")
    species = match.group("species")
    if species not in crn.names:
        raise ParseError(f"predicate refers to unknown species {species!r}")

    def bound(raw: str) -> float:
        try:
            quantity = parse_quantity(raw.strip().replace("∞", "inf"))
            return quantity.in_slot(CONCENTRATION, crn.concentration_unit)
        except (ValueError, ParseError) as e:
            raise ParseError(f"bad predicate bound {raw.strip()!r}: {e}") from None

    at = match.group("at")
    idn = None if at == "final" else int(at.split(":")[1])
    try:
        return Predicate(species, bound(match.group("lo")), bound(match.group("hi")), idn)
    except ValueError as e:
        raise ParseError(str(e)) from None
