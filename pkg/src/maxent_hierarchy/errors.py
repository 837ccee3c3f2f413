"""Exception types raised by the library."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical routine (CLI exit code 2)."""


class EigensolverError(NumericalError):
    pass


class MomentOverflowError(NumericalError):
    """Raised when a moment or an intermediate vector leaves double range."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class ConvergenceError(NumericalError):
    """The dual Newton iteration did not reach the gradient tolerance.

    ``ensemble`` holds the last iterate so callers can still report on it.
    """

    def __init__(self, message, grad_norm, ensemble=None):
        super().__init__(message)
        self.grad_norm = grad_norm
        self.ensemble = ensemble


class InfeasibleError(NumericalError):
    pass


class BasisMismatchError(ValueError):
    pass


class MultiplierOverflowError(NumericalError):
    pass
