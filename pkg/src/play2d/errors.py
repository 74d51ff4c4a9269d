"""Shared exception types and process exit codes."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class Play2dError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigurationError(Play2dError):
    """Invalid configuration value or an impossible scene setup."""

    exit_code = EXIT_CONFIG


class InputError(Play2dError):
    """Caller passed malformed data (bad shapes, non-finite values, ...)."""

    exit_code = EXIT_DATA


class DataError(Play2dError):
    """Dataset cannot be used for the requested operation."""

    exit_code = EXIT_DATA


class FormatError(Play2dError):
    """On-disk artifact is corrupt, truncated, or has the wrong version."""

    exit_code = EXIT_DATA


class NumericError(Play2dError):
    """Runtime numerical failure (non-finite loss or gradient)."""

    exit_code = EXIT_NUMERIC
