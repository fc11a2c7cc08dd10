"""Exception types raised by the numerical routines."""


class LiberationError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LiberationError, ValueError):
    """An argument lies outside the region where a quantity is defined."""


class PoleError(LiberationError, ZeroDivisionError):
    """Evaluation too close to a pole (typically z = +1 or z = -1)."""


class BranchError(LiberationError):
    """A square-root branch could not be tracked continuously."""


class IntegrationError(LiberationError, RuntimeError):
    """The adaptive integrator failed (step-size underflow, non-finite state)."""


class ConvergenceError(LiberationError, RuntimeError):
    """An iterative solver did not converge.

    ``last`` holds the final iterate(s) so callers can inspect them.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class DivergenceError(LiberationError):
    """A boundary limit diverges (the angle lies in the set I_t).

    ``sentinel`` is the large negative value reported in place of -inf.
    """

    def __init__(self, message, sentinel=-1e300):
        super().__init__(message)
        self.sentinel = sentinel


class NegativeDensityError(LiberationError):
    """A recovered density is negative beyond roundoff tolerance."""
