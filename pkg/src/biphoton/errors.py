"""Exception and warning types shared across the package."""


class BiphotonError(Exception):
    """Base class for all package errors."""


class ValidationError(BiphotonError, ValueError):
    """A parameter violates a documented precondition."""


class DeltaLimit(ValidationError):
    """Operation needs a finite correlation width but epsilon == 0.

    The delta-correlated limit has closed forms in :mod:`biphoton.detection`
    (``split_probabilities_delta``) that should be used instead.
    """


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a closed form."""


class EmptyInput(ValidationError):
    """An estimator received zero events."""


class WeightError(ValidationError):
    """Estimator weights do not sum to one."""


class NonConvergence(BiphotonError, ArithmeticError):
    """Adaptive quadrature ran out of subdivisions before meeting tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ApproximationWarning(UserWarning):
    """A small-displacement expansion was evaluated outside its regime."""
