"""Exception hierarchy shared across the package.

Each class carries the CLI exit code used when the error escapes a
subcommand: 1 for configuration problems, 2 for data problems, 3 for
training problems.
"""


class PlugcastError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ConfigError(PlugcastError):
    """Invalid or inconsistent run configuration."""

    exit_code = 1


class SchemaError(PlugcastError):
    """Input file does not match the declared column schema."""

    exit_code = 2


class DataError(PlugcastError):
    """Input data violates a precondition (too short, empty, misaligned)."""

    exit_code = 2


class AlignmentError(DataError):
    """Series start or length incompatible with the requested resampling."""


class InsufficientHistoryError(DataError):
    """Not enough earlier steps to form the requested lags."""


class DegenerateSeriesError(DataError):
    """Series has no variation where variation is required."""


class UndefinedStatisticError(DataError):
    """Statistic is undefined for the given inputs (e.g. zero variance)."""


class FitError(PlugcastError):
    """Closed-form model fit failed (rank deficiency, too few rows)."""

    exit_code = 3


class TrainingError(PlugcastError):
    """Iterative training failed."""

    exit_code = 3


class DivergenceError(TrainingError):
    """Training loss became non-finite; message names the epoch."""
