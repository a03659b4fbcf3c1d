"""Exception types shared across the package.

Precondition violations raise plain ValueError; these classes cover
numeric and fitting failures that carry extra context.
"""


class NumericError(RuntimeError):
    """An internal numeric step (eigensolve, quadrature) failed."""


class FitFailure(RuntimeError):
    """Nonlinear fit did not converge. `.best` holds the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EstimationFailure(RuntimeError):
    """Parameter estimation failed (flat loss or boundary solution)."""
