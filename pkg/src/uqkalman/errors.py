"""Exception hierarchy shared by the library and the command line."""


class KalmanError(Exception):
    """Base class for every error raised by :mod:`uqkalman`."""


class ConfigurationError(KalmanError, ValueError):
    """Inconsistent dimensions, unknown names or otherwise invalid input."""


class ValidationError(ConfigurationError):
    """A matrix violates a structural requirement (symmetry, definiteness)."""


class DomainError(KalmanError, ValueError):
    """An argument lies outside the domain of a sampled function."""


class NumericalError(KalmanError, ArithmeticError):
    """A computation produced non-finite values or lost definiteness."""

    def __init__(self, message, *, time=None, node=None):
        super().__init__(message)
        self.time = time
        self.node = node


class NonConvergenceError(NumericalError):
    """The adaptive integrator exhausted its step budget."""
