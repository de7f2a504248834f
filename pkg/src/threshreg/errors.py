"""Exception hierarchy shared by the estimators, the harness and the CLI."""

from __future__ import annotations


class ThreshRegError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(ThreshRegError, ValueError):
    pass


class InvalidScenario(InvalidArgument):
    pass


class AssumptionViolated(ThreshRegError):
    """The empirical Gram matrix is not almost diagonal.

    The offending quantities are kept as attributes so callers (and the CLI)
    can report them.
    """

    def __init__(self, message: str, **quantities: float):
        super().__init__(message)
        self.quantities = quantities


class SingularSystem(ThreshRegError):
    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class ConfigError(InvalidArgument):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DataError(InvalidArgument):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = ""
        if row is not None:
            where = f"row {row}"
            if column is not None:
                where += f", column {column!r}"
            where += ": "
        super().__init__(where + message)
        self.row = row
        self.column = column
