"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
1 validation, 2 resource, 3 numeric, 4 acceptance failure.
"""

from __future__ import annotations


class ToeplabError(Exception):
    exit_code = 3


class ValidationError(ToeplabError, ValueError):
    """Invalid configuration or argument; ``field`` names the offending path."""

    exit_code = 1

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class UnsupportedError(ValidationError):
    pass


class DomainError(ToeplabError, ValueError):
    exit_code = 3


class RangeError(ToeplabError, OverflowError):
    exit_code = 3


class ThresholdError(ToeplabError):
    """The semiclassical parameter is below the point where a quantity is defined."""

    exit_code = 3


class ResourceError(ToeplabError, RuntimeError):
    exit_code = 2

    def __init__(self, message: str, estimate: float | None = None, budget: float | None = None):
        self.estimate = estimate
        self.budget = budget
        super().__init__(message)


class AcceptanceFailure(ToeplabError):
    exit_code = 4
