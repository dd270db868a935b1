"""Exception types shared across the package."""


class PearsonSplittingError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PearsonSplittingError, ValueError):
    """Input violates a documented precondition."""


class DivergenceError(PearsonSplittingError, FloatingPointError):
    """A simulated path produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FlowFailureError(PearsonSplittingError):
    """The nonlinear ODE flow produced non-finite values."""


class IntegrationError(PearsonSplittingError):
    """Numerical quadrature of a density failed."""


class SingularInformationError(PearsonSplittingError, ValueError):
    """An information matrix could not be inverted."""


class GradientError(PearsonSplittingError):
    """A finite-difference gradient could not be formed."""
