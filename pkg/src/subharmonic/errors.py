"""Exception hierarchy shared by the numerical modules."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure."""


class DomainError(ValueError):
    """Raised when an argument lies outside the admissible domain."""


class IntegrationError(NumericalError):
    """Raised when the ODE integrator cannot continue.

    Carries the last accepted time and state so callers can report the
    completed prefix of a run.
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class QuadratureError(NumericalError):
    """Raised when adaptive quadrature fails to reach the requested accuracy."""


class ConvergenceError(NumericalError):
    """Raised when an iterative solver does not converge."""


class SingularJacobianError(NumericalError):
    """Raised when a Newton step meets a (numerically) singular Jacobian."""
