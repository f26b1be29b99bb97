"""Exception hierarchy shared across the package.

Two families matter for the command line tool: ``ValidationError`` covers
rejected inputs and configuration (exit code 1), ``NumericalError`` covers
failures arising during computation (exit code 2).
"""


class ValidationError(ValueError):
    """Input or configuration rejected before any computation ran."""


class TruncationBoundError(ValidationError):
    """A state parameter puts too much population above the Fock cutoff."""


class NoSignalError(ValidationError):
    """A dataset contains no counts, so there is nothing to reconstruct."""


class NumericalError(RuntimeError):
    """A computation failed in a way more data or a better grid could fix."""


class GridLeakageError(NumericalError):
    """Too much probability mass falls outside the binning grid."""


class DegenerateBinError(NumericalError):
    """A binned probability underflowed to (near) zero where it must divide."""


class IllConditionedError(NumericalError):
    """A matrix inverse was requested beyond the supported condition number."""
