"""Exception hierarchy shared by the library and the management commands."""

from __future__ import annotations

from typing import Any

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class IntensityError(Exception):
    """Base class for every error raised by tcintensity."""

    exit_code = EXIT_VALIDATION


class ValidationError(IntensityError):
    """Input data or configuration does not satisfy its contract."""


class ParseError(ValidationError):
    """A tracks file could not be read; ``line`` is 1-based in the file."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ValidationError):
    """A model, config or ensemble file does not match its schema."""


class DomainError(IntensityError):
    """An argument lies outside the domain of a formula."""


class SimulationError(ValidationError):
    """A storm cannot be simulated as given (e.g. missing environment)."""


class FitError(IntensityError):
    """A numerical fit failed."""

    exit_code = EXIT_NUMERICAL


class StateCollapseError(FitError):
    """A mixture component or hidden state collapsed onto the sigma floor."""


class ConvergenceError(FitError):
    """An iterative fit ran out of iterations; ``best`` holds the best iterate."""

    def __init__(self, message: str, best: Any = None) -> None:
        self.best = best
        super().__init__(message)
