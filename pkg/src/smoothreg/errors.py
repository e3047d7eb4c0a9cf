"""Exception hierarchy shared by every module."""


class SmoothRegError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SmoothRegError, ValueError):
    """Malformed or out-of-range input."""


class DataError(InvalidInputError):
    """Problems with an input data file (missing columns, unparseable values)."""


class NumericalError(SmoothRegError, ArithmeticError):
    """A numerical procedure could not produce a defined result."""


class DomainError(NumericalError):
    """Moment vector outside the domain ``det(Sigma) > 0``.

    Attributes
    ----------
    delta : float
        The offending determinant.
    """

    def __init__(self, delta, message=None):
        self.delta = float(delta)
        super().__init__(message or f"det(Sigma) = {self.delta:.6g} is not positive")


class DegenerateError(NumericalError):
    """A statistic is undefined because of a degenerate input (zero periodogram, g = 0, ...)."""


class SingularCovarianceError(NumericalError):
    """Covariance matrix too ill-conditioned to invert."""


class EmbeddingError(NumericalError):
    """Circulant embedding produced materially negative eigenvalues."""
