"""Exception and warning types raised across the package."""


class QutError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(QutError, ValueError):
    pass


class NonFiniteInput(QutError, ValueError):
    pass


class InvalidDimension(QutError, ValueError):
    pass


class InvalidSize(QutError, ValueError):
    pass


class TooFewReplicates(QutError, ValueError):
    pass


class InvalidFolds(QutError, ValueError):
    pass


class InsufficientData(QutError, ValueError):
    pass


class DegreesOfFreedomExhausted(QutError, ValueError):
    pass


class SigmaCollapse(QutError, ArithmeticError):
    """Scaled lasso noise estimate fell below 1e-8 (the model fits exactly)."""


class ConvergenceWarning(UserWarning):
    """An iterative routine hit its iteration cap before meeting its tolerance."""
