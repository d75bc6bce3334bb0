"""Exception types shared across the package.

The CLI maps these onto exit codes, so new error conditions should reuse one
of the classes below rather than raising bare ValueError.
"""


class PressemError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PressemError, ValueError):
    """An argument or configuration value is outside its documented domain."""


class ParseError(PressemError, ValueError):
    """A document (JSON model/table/config or CSV trace) could not be parsed.

    ``location`` carries a human-readable position: a line number for CSV,
    a field path for structured documents.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class FitError(PressemError, RuntimeError):
    """Model fitting could not proceed (e.g. an empty velocity bin)."""
