"""Semantic exception hierarchy.

The CLI maps these onto exit codes: domain errors (invalid designs or
parameters, rank deficiency) exit 1, I/O errors exit 2, numerical
failures (ill-conditioning, nonfinite values) exit 3.
"""


class OucvError(Exception):
    """Base class for all library errors."""


class InvalidDesignError(OucvError):
    """A point set violates the design invariants (sorted, distinct,
    endpoints 0 and 1, minimum size)."""


class InvalidParameterError(OucvError):
    """A scalar argument is outside its documented domain."""


class FactorialOverflowError(InvalidParameterError):
    """Factorial-gap construction requested beyond binary64 range (n > 170)."""


class LinearDependenceError(OucvError):
    """Trend basis functions are numerically linearly dependent on the design."""


class ConditioningError(OucvError):
    """A dense factorization or a leave-one-out variance collapsed numerically."""


class NumericalFailureError(OucvError):
    """A nonfinite value appeared where the computation cannot continue."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta
