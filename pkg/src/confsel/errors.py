"""Exception and warning types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data/input problems with 3, and internal invariant violations
(which indicate a bug, not user error) with 4.
"""


class ConfselError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(ConfselError):
    """Invalid configuration: bad key, bad value, or inconsistent combination."""

    exit_code = 2


class DataError(ConfselError):
    """Invalid input data: malformed file, out-of-range value, empty batch."""

    exit_code = 3


class InternalCheckError(ConfselError):
    """A runtime invariant that should hold by construction was violated."""

    exit_code = 4


class DegenerateScoresWarning(UserWarning):
    """All scores in a conformal batch are zero; e-values carry no evidence."""
