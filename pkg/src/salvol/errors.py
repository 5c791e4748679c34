"""Error types.

Every error exposes :py:meth:`SalvolError.json_repr` so a JSON log formatter can serialize its fields.
"""

from typing import Any, Dict, Optional

__all__ = [
    "SalvolError",
    "ParseError",
    "ValidationError",
    "EmptyInputError",
    "ShapeError",
    "FormatError",
    "ConfigError",
]


class SalvolError(Exception):
    """Base class for all library errors."""

    def json_repr(self) -> Dict[str, Any]:
        return {}


class ParseError(SalvolError, ValueError):
    """Input doesn't match the expected schema.

    For CSV input `line` is the 1-based line number (the header is line 1), for JSON input it's the 0-based
    record index.
    """

    def __init__(self, reason: str, line: Optional[int] = None) -> None:
        self.reason = reason
        self.line = line
        where = "" if line is None else f" (line {line})"
        super().__init__(f"{reason}{where}")

    def json_repr(self) -> Dict[str, Any]:
        return {"reason": self.reason, "line": self.line}


class ValidationError(SalvolError, ValueError):
    """Input is well-formed but violates a data invariant."""

    def __init__(self, reason: str, line: Optional[int] = None) -> None:
        self.reason = reason
        self.line = line
        where = "" if line is None else f" (line {line})"
        super().__init__(f"{reason}{where}")

    def json_repr(self) -> Dict[str, Any]:
        return {"reason": self.reason, "line": self.line}


class EmptyInputError(SalvolError, ValueError):
    """An operation received nothing to work on."""


class ShapeError(SalvolError, ValueError):
    """Array shapes or sequence lengths don't match."""

    def __init__(self, message: str, expected: Any = None, actual: Any = None) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(message)

    def json_repr(self) -> Dict[str, Any]:
        return {"expected": repr(self.expected), "actual": repr(self.actual)}


class FormatError(SalvolError, ValueError):
    """A binary file is corrupt or of an unknown format."""


class ConfigError(SalvolError, ValueError):
    """Run configuration is invalid."""

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        self.key = key
        super().__init__(message)

    def json_repr(self) -> Dict[str, Any]:
        return {"key": self.key}
