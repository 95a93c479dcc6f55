"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, ParseError and
DataError -> 3, QualityGateError -> 4.
"""


class AuditError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(AuditError):
    """Schema is malformed or an operation was asked for an unknown/ill-typed attribute."""


class ParseError(AuditError):
    """Input file could not be parsed; carries the offending line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DataError(AuditError):
    """Input data violates a precondition (bad counts, missing rates, mismatched ids)."""


class ConfigError(AuditError):
    """Configuration file is missing required keys or holds out-of-range values."""


class QualityGateError(AuditError):
    """A configured detection-quality floor was not met."""
