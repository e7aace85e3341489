"""Exception types raised by the solvers and their support code."""

import numpy as np


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class SingularError(np.linalg.LinAlgError):
    """A factorization met a (numerically) zero pivot."""


class RankError(np.linalg.LinAlgError):
    """A least-squares matrix is rank deficient."""


class NotSPDError(np.linalg.LinAlgError):
    """An operator expected to be symmetric positive definite is not."""


class ZeroMatrixError(ValueError):
    """The matrix has no nonzero entries."""


class MissingDataError(ValueError):
    """A diagnostic needs data that was not recorded during the solve."""


class ParseError(ValueError):
    """Malformed Matrix Market input.

    Attributes
    ----------
    lineno : int or None
        1-based line number of the offending line.
    """

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class UnsupportedFormatError(ValueError):
    """Well-formed Matrix Market input of a kind this reader does not handle."""


class Breakdown(Exception):
    """Base class for Krylov recurrence breakdowns.

    The exception carries the last valid recurrence state so callers can
    still use the basis built so far.
    """

    def __init__(self, message, state=None, side=None):
        super().__init__(message)
        self.state = state
        self.side = side


class LuckyBreakdown(Breakdown):
    """The Krylov space is exhausted; iterates from it are exact."""


class SeriousBreakdown(Breakdown):
    """Two-sided Lanczos lost biorthogonal coupling (w^T v ~ 0)."""
