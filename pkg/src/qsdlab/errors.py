"""Exception hierarchy.

Two broad classes matter for callers: :class:`ValidationError` covers bad
input (rejected configs, arguments outside an operation's domain), while
:class:`NumericalError` covers computations that started from legal input but
could not produce a trustworthy result.  The command-line driver maps the
former to exit code 1 and the latter to exit code 2.
"""


class QsdlabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(QsdlabError):
    """Input rejected: bad schema, bad value, or violated model invariant."""


class DomainError(ValidationError):
    """An operation was called outside its domain (e.g. a non-interior state)."""


class EmptySpaceError(DomainError):
    """A truncation too small to contain any interior state."""


class NumericalError(QsdlabError):
    """A computation failed for numerical reasons."""


class RateOverflowError(NumericalError):
    """A transition rate overflowed 64-bit floating point."""


class ConvergenceError(NumericalError):
    """Iteration hit its step limit before meeting the tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ReducibleSpaceError(NumericalError):
    """The truncated chain appears reducible; the spectral problem is ill-posed."""


class ConditioningImpossibleError(NumericalError):
    """Survival mass underflowed; conditioning on survival is meaningless."""


class NoSurvivorsError(NumericalError):
    """Every simulated trajectory was absorbed before the target time."""

    def __init__(self, message, survival_estimate=0.0):
        super().__init__(message)
        self.survival_estimate = survival_estimate


class NoFitError(NumericalError):
    """A rate fit was requested on data that cannot support one."""
