"""Exception types shared across the package."""

from __future__ import annotations


class CarbonSnapError(Exception):
    """Base class for all carbonsnap errors."""


class ValidationError(CarbonSnapError):
    """A value or combination of values violates a model invariant."""


class ParseError(ValidationError):
    """An input file or payload could not be parsed.

    Carries enough location context (path, line, column) to point the
    user at the offending cell of a CSV or field of a JSON payload.
    """

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, column: str | None = None):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(message)

    def __str__(self) -> str:
        prefix = ""
        if self.path is not None:
            prefix += f"{self.path}:"
        if self.line is not None:
            prefix += f"{self.line}:"
        if prefix:
            prefix += " "
        loc = f" (column '{self.column}')" if self.column else ""
        return f"{prefix}{super().__str__()}{loc}"


class CoverageGapError(ValidationError):
    """An energy profile interval is not covered by the intensity series."""


class ConfigError(ValidationError):
    """A run configuration file is invalid or references missing inputs."""


class FetchError(CarbonSnapError):
    """A remote intensity fetch failed after retries."""
