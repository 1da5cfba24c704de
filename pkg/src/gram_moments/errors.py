"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for invalid input,
3 for numerical conditioning problems, 4 for convergence failures.
"""


class GramMomentsError(Exception):
    exit_code = 2


class DimensionError(GramMomentsError):
    pass


class NotPositiveDefinite(GramMomentsError):
    pass


class RepeatedEigenvalues(GramMomentsError):
    pass


class DomainError(GramMomentsError):
    pass


class OrderOutOfRange(GramMomentsError):
    pass


class MissingDerivatives(GramMomentsError):
    pass


class EmptyGrid(GramMomentsError):
    pass


class IllConditioned(GramMomentsError):
    exit_code = 3


class DegenerateCoefficient(GramMomentsError):
    exit_code = 3


class SingularSample(GramMomentsError):
    exit_code = 3

    def __init__(self, message, count=0):
        super().__init__(message)
        self.count = count


class AllRejected(GramMomentsError):
    exit_code = 3


class NoConvergence(GramMomentsError):
    exit_code = 4

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ConvergenceWarning(GramMomentsError, RuntimeWarning):
    """Raised when a truncated power series is no longer decreasing."""

    exit_code = 4

    def __init__(self, message, last_terms=()):
        super().__init__(message)
        self.last_terms = tuple(last_terms)
