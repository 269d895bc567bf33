"""Exception types shared across the package."""


class HaarDistError(Exception):
    """Base class for package errors."""


class DegenerateSpectrum(HaarDistError, ValueError):
    """Spectrum has a single distinct eigenvalue where two are required."""


class DomainError(HaarDistError, ValueError):
    """Argument lies outside the domain of the function."""


class PrecisionExhausted(HaarDistError, ArithmeticError):
    """High-precision coefficient arithmetic failed its normalization check."""


class OracleTooLarge(HaarDistError, ValueError):
    """Brute-force oracle requested beyond its supported size."""


class DimensionMismatch(HaarDistError, ValueError):
    """State and operator/circuit dimensions disagree."""


class FitFailed(HaarDistError, RuntimeError):
    """No multi-start run met the convergence tolerance.

    The best point found is still available as ``fit``.
    """

    def __init__(self, message, fit):
        super().__init__(message)
        self.fit = fit
