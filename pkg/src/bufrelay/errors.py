"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class EmptyResultError(ValueError):
    """A statistic was requested over an empty sample."""


class ConfigError(ValueError):
    """Invalid scenario or experiment configuration.

    ``field`` names the offending key (dotted path); ``line`` is the 1-based
    line in the source file when known.
    """

    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{where}: {message}")
