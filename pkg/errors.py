"""Exception hierarchy for the ordinal reward modeling toolkit.

Every library error carries the exit code the CLI reports for it.
"""
from typing import Optional


class OrdinalRMError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 1


class UsageError(OrdinalRMError):
    """Invalid combination of command-line options."""
    exit_code = 2


class SchemaError(OrdinalRMError, ValueError):
    """Configuration or data that violates its schema."""
    exit_code = 3


class DimensionError(SchemaError):
    """Vector length does not match what the operation expects."""


class LevelError(SchemaError):
    """Ordinal level outside {-K..K}."""


class ContractError(SchemaError):
    """An input reached an operation whose precondition it violates."""


class UndefinedMetricError(SchemaError):
    """A metric has no defined value on the given data."""


class DataParseError(SchemaError):
    """Malformed line in a dataset file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericError(OrdinalRMError):
    """Non-finite loss or gradient during optimization."""
    exit_code = 4

    def __init__(self, message: str, step: Optional[int] = None, example: Optional[int] = None):
        self.step = step
        self.example = example
        super().__init__(message)
