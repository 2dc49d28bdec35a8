"""Exception hierarchy.

The CLI maps each family onto a stable exit code, so new errors should
subclass one of the three families below rather than ``ExpertradeError``
directly.
"""


class ExpertradeError(Exception):
    """Base class for all package errors."""


class ConfigError(ExpertradeError, ValueError):
    """Invalid configuration or parameters (CLI exit code 1)."""


class DataError(ExpertradeError, ValueError):
    """Malformed or insufficient market/event/expert data (CLI exit code 2)."""


class InsufficientHistoryError(DataError):
    pass


class BackendError(ExpertradeError, RuntimeError):
    """A completion or embedding backend failed (CLI exit code 3)."""


class ScriptExhaustedError(BackendError):
    pass


class ParseError(ExpertradeError, ValueError):
    """Model output does not match the expected bracket grammar."""


class UndefinedMetricError(ExpertradeError, ArithmeticError):
    """A metric is undefined for the given input (e.g. zero variance)."""
