"""Exception hierarchy.

The CLI maps these onto exit codes: I/O problems (``OSError``) exit 2,
validation problems exit 3 and numeric failures exit 4.
"""


class PolsarError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PolsarError, ValueError):
    """Input violates a documented precondition."""


class FormatError(ValidationError):
    """A file does not conform to its container format."""


class SizeMismatchError(FormatError):
    """Header and payload disagree on the amount of data."""


class UnsupportedVersionError(FormatError):
    """A container declares a version this package cannot read."""


class NumericError(PolsarError, ArithmeticError):
    """A computation produced a non-finite or singular result."""
