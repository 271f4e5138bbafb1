"""
Custom Exception Classes

Defines simulator-specific exceptions. Exceptions that describe a location in
an input file or a protocol exchange keep that context as attributes.
"""

from typing import Iterable, Optional


class VanetSimError(Exception):
    """Base exception for all simulator errors."""

    pass


class ConfigurationError(VanetSimError):
    """Raised when environment or runtime configuration is invalid."""

    pass


class ScenarioError(VanetSimError):
    """Base exception for invalid scenario input (exit code 2)."""

    pass


class XMLParseError(ScenarioError):
    """Raised when an input document is not well-formed XML."""

    def __init__(self, source: str, line: int, column: int, reason: str):
        self.source = source
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"{source}:{line}:{column}: malformed XML: {reason}")


class SchemaError(ScenarioError):
    """Raised when an element is missing or carries an invalid attribute."""

    def __init__(self, element: str, attribute: str, reason: str, source: Optional[str] = None):
        self.element = element
        self.attribute = attribute
        self.reason = reason
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}<{element}> attribute '{attribute}': {reason}")


class NetworkBuildError(ScenarioError):
    """Raised when nodes, edges and connections do not form a valid network."""

    def __init__(self, reason: str, gaps: Optional[Iterable[int]] = None):
        self.reason = reason
        self.gaps = list(gaps) if gaps is not None else []
        message = reason
        if self.gaps:
            message += f" (missing link indices: {', '.join(str(g) for g in self.gaps)})"
        super().__init__(message)


class ScenarioValidationError(ScenarioError):
    """Raised when files parse individually but disagree with each other."""

    def __init__(self, reason: str, source: Optional[str] = None):
        self.reason = reason
        self.source = source
        super().__init__(f"{source}: {reason}" if source else reason)


class StateLengthError(ScenarioValidationError):
    """Raised when a state string does not match the light's link count."""

    def __init__(self, tl_id: str, expected: int, actual: int, source: Optional[str] = None, detail: str = ""):
        self.tl_id = tl_id
        self.expected = expected
        self.actual = actual
        reason = (
            f"traffic light '{tl_id}': state length {actual} does not match "
            f"expected length {expected}"
        )
        if detail:
            reason += f" ({detail})"
        super().__init__(reason, source)


class SignalError(VanetSimError):
    """Base exception for signal program errors."""

    pass


class InvalidStateCharacterError(SignalError):
    """Raised when a state character is outside the G/g/y/r alphabet."""

    def __init__(self, character: str):
        self.character = character
        super().__init__(f"invalid signal state character '{character}' (expected one of G, g, y, r)")


class AllocationError(VanetSimError):
    """Raised when a green split cannot be computed for the given loads and bounds."""

    pass


class MetricsError(VanetSimError):
    """Raised when delivery metrics are requested over an invalid horizon."""

    pass


class ControlError(VanetSimError):
    """Raised by control command handling; converted to an ERR response."""

    MALFORMED = 1
    UNKNOWN_ID = 2
    LENGTH_MISMATCH = 3
    END_REACHED = 4
    BUSY = 5

    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(f"ERR {code} {message}")


class ControlServerError(VanetSimError):
    """Raised when the control server cannot bind its endpoint."""

    def __init__(self, host: str, port: int, reason: str):
        self.host = host
        self.port = port
        self.reason = reason
        super().__init__(f"cannot listen on {host}:{port}: {reason}")


class PlotError(VanetSimError):
    """Raised when a metrics CSV cannot be plotted."""

    pass


class OutputError(VanetSimError):
    """Raised when a result file cannot be written (exit code 3)."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"cannot write '{path}': {reason}")
