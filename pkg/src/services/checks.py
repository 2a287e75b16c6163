"""Static checks behind ``main.py check``.

Each finding is a ``Diagnostic`` with a severity, a stable code, an optional
source span and a message; the command prints them as JSON lines. Codes:

- ``parse``: syntax error, unknown species or unit mismatch
- ``fraction-range``: dispense fraction outside (0, 1)
- ``linearity``: a sample variable used other than exactly once
- ``unbound-variable``: the protocol is not closed
- ``nonpositive-time``: an equilibration of 0 s in stochastic mode
- ``fraction-outside-bounds``: a nominal fraction outside the noise bounds
- ``shape``: a sample literal that does not fit the network
- ``superlinear-kinetics``: a reaction whose rate equations may blow up
- ``null-effect``: a reaction that changes nothing
"""

import json
from dataclasses import dataclass
from typing import List, Literal, Optional

from src.models.crn import Crn
from src.models.noise import NoiseConfig
from src.models.protocol import Equilibrate, Initial, LetDispense, Protocol, SourceSpan
from src.services.syntax import check_linear, desugar, walk
from src.utils.errors import ParseError

Severity = Literal["error", "warning"]


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: Optional[SourceSpan] = None
    source: str = "protocol"

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "source": self.source,
            "span": self.span.to_dict() if self.span else None,
            "message": self.message,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def from_parse_error(error: ParseError, source: str) -> Diagnostic:
    return Diagnostic("error", error.code, error.message, error.span, source)


def check_crn(crn: Crn) -> List[Diagnostic]:
    """Warnings about reactions.

    A reaction of order two or more that produces more molecules than it
    consumes makes the rate equations superlinear, so solutions may escape
    in finite time.
    """
    diagnostics = []
    for reaction in crn.reactions:
        text = crn.describe(reaction)
        if reaction.is_null_effect:
            diagnostics.append(
                Diagnostic("warning", "null-effect", f"reaction {text} changes nothing", source="crn")
            )
        if reaction.order >= 2 and sum(reaction.product) > reaction.order:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    "superlinear-kinetics",
                    f"reaction {text} is autocatalytic of order {reaction.order}; "
                    f"its rate equations may blow up in finite time",
                    source="crn",
                )
            )
    return diagnostics


def check_protocol(
    p: Protocol, crn: Crn, stochastic: bool = False, noise: Optional[NoiseConfig] = None
) -> List[Diagnostic]:
    """Static checks of a parsed protocol.

    Args:
        p: The protocol, as parsed
        crn: Its network
        stochastic: Check for the stochastic semantics
        noise: Noise configuration used in stochastic mode
    """
    diagnostics = []
    for violation in check_linear(p):
        code = "unbound-variable" if violation.kind == "unbound" else "linearity"
        diagnostics.append(Diagnostic("error", code, violation.message, violation.span))

    expanded = desugar(p)
    for node in walk(expanded):
        if isinstance(node, Initial) and len(node.conc) != crn.size:
            diagnostics.append(
                Diagnostic(
                    "error",
                    "shape",
                    f"sample has {len(node.conc)} concentrations, the network has {crn.size} species",
                    node.span,
                )
            )
        if isinstance(node, LetDispense) and not 0.0 < node.fraction < 1.0:
            diagnostics.append(
                Diagnostic(
                    "error",
                    "fraction-range",
                    f"dispense fraction {node.fraction!r} is not in (0, 1)",
                    node.span,
                )
            )
    if not stochastic:
        return diagnostics

    noise = noise or NoiseConfig()
    lo, hi = noise.dispense.bounds
    for node in walk(p):
        if isinstance(node, Equilibrate) and node.duration <= 0.0:
            diagnostics.append(
                Diagnostic(
                    "error",
                    "nonpositive-time",
                    f"equilibration for {node.duration!r} s: stochastic timing needs a duration > 0",
                    node.span,
                )
            )
        if isinstance(node, LetDispense) and not noise.dispense.degenerate and not lo < node.fraction < hi:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    "fraction-outside-bounds",
                    f"dispense fraction {node.fraction!r} lies outside the noise bounds ({lo!r}, {hi!r})",
                    node.span,
                )
            )
    return diagnostics


def has_errors(diagnostics: List[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)
