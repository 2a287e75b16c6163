"""Exception hierarchy for the protocol toolkit.

Every error raised on purpose by the package derives from ``ProtocolToolError``
so the command line can map it to an exit code in one place.
"""

from typing import Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from src.models.protocol import SourceSpan


class ProtocolToolError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ProtocolToolError):
    """A configuration file or flag could not be validated."""


class StructuralError(ProtocolToolError):
    """Shapes do not line up, or a state left the admissible region."""


class ParseError(ProtocolToolError):
    """Syntax or static error in protocol or CRN text.

    Attributes:
        message: Human readable description
        span: Location of the offending text, if known
        code: Diagnostic code reported by the checker
    """

    def __init__(
        self, message: str, span: Optional["SourceSpan"] = None, code: str = "parse"
    ) -> None:
        self.message = message
        self.span = span
        self.code = code
        location = f" at line {span.line}, column {span.column}" if span else ""
        super().__init__(f"{message}{location}")


class CaptureError(ProtocolToolError):
    """Substitution would capture a free variable under a binder."""


class FreshnessError(ProtocolToolError):
    """A supposedly fresh name already occurs free where it would be bound."""


class UnboundVariableError(ProtocolToolError):
    """A sample variable has no binding in the evaluation environment."""


class LinearityError(ProtocolToolError):
    """A protocol failed the single-use restriction on sample variables."""


class IllPosedError(ProtocolToolError):
    """The rate equations have no usable solution over the requested horizon."""


class ZenoError(ProtocolToolError):
    """A hybrid execution exceeded the configured number of jumps."""


class SamplingError(ProtocolToolError):
    """A random draw could not satisfy its constraints."""


class TruncationTooTightError(SamplingError):
    """Rejection sampling exhausted its attempt budget."""


class NonpositiveEquilibrateTimeError(SamplingError):
    """An exponential equilibration time was requested for a duration <= 0."""


class HoleError(ProtocolToolError):
    """A template parameter is missing, unused, or used in the wrong slot."""


class PredicateError(ProtocolToolError):
    """A predicate refers to an unknown species or a missing observation."""
