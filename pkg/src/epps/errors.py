"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericalError -> 3.
"""


class EppsError(Exception):
    """Base class for all package errors."""


class DataError(EppsError):
    """Malformed, inconsistent or insufficient input data."""


class NumericalError(EppsError):
    """A numerical procedure failed or produced an invalid result."""


class FitConvergenceError(NumericalError):
    """Raised when the optimizer stalls; carries the best iterate found.

    Attributes
    ----------
    result : FitResult
        Best iterate at the time of failure.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
