"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an operation's preconditions are violated."""


class OutOfRange(InvalidArgument):
    """An exponent or parameter falls outside the range where a bound is defined."""


class SolverFailure(RuntimeError):
    """Nonlinear iteration did not converge.

    Attributes
    ----------
    residual : float
        Infinity norm of the last residual.
    time : float or None
        Time level at which the failure happened, when known.
    """

    def __init__(self, message, residual=float("nan"), time=None):
        super().__init__(message)
        self.residual = residual
        self.time = time

    def __str__(self):
        base = super().__str__()
        if self.time is not None:
            base += f" (t={self.time:.6g})"
        return f"{base}; last residual {self.residual:.3e}"
