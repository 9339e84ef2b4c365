"""Exception hierarchy shared across the package.

Exit codes used by the CLI: 2 for config/validation/state errors, 3 for
I/O and container format errors, 4 for numerical failures.
"""


class DegmonError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(DegmonError):
    """An argument or input violates a documented precondition."""

    exit_code = 2


class ConfigError(DegmonError):
    """A configuration file or key is missing, malformed, or inconsistent."""

    exit_code = 2


class StateError(DegmonError):
    """An operation was called in a state that does not allow it."""

    exit_code = 2


class FormatError(DegmonError):
    """A file does not conform to its documented on-disk format."""

    exit_code = 3


class IOFailure(DegmonError):
    """A required file is missing or could not be read/written."""

    exit_code = 3


class NumericalError(DegmonError):
    """A computation produced non-finite or degenerate values."""

    exit_code = 4
