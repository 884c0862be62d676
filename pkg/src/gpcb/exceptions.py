"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes (see ``gpcb.cli``).
"""


class GPCBError(Exception):
    """Base class for all package errors."""


class InputError(GPCBError, ValueError):
    """Malformed arguments: wrong shapes, mismatched lengths, bad ids."""


class InstanceTooLargeError(InputError):
    """Exhaustive computation requested on an instance beyond desk scale."""


class ConfigError(GPCBError, ValueError):
    """Invalid configuration value. ``path`` names the offending field."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class NumericalError(GPCBError, ArithmeticError):
    """A factorization failed even after jitter retries."""
