"""
Error Types
Exception hierarchy shared by every subsystem; the CLI maps them to exit codes.
"""


class PannError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigurationError(PannError, ValueError):
    """Invalid or inconsistent configuration (shapes, options, stale designs)."""

    exit_code = 1


class UnsupportedOperation(ConfigurationError):
    """A valid configuration asked for something this library does not do."""


class DataError(PannError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 2


class TrainingDivergence(PannError, RuntimeError):
    """The loss became non-finite during optimization."""

    exit_code = 3


class InternalError(PannError, RuntimeError):
    """An internal contract was broken."""

    exit_code = 1
