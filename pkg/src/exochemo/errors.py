"""Exception hierarchy shared by the solvers, diagnostics and CLI."""


class ExochemoError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteError(ExochemoError, ValueError):
    """A field carries NaN or Inf values."""


class NonConvergence(ExochemoError):
    """Iteration budget exhausted before the requested tolerance was met."""

    def __init__(self, message, *, iterations=None, residual=None, D=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.D = D


class NonPositivity(ExochemoError):
    """A Newton iterate could not be kept inside the region v > 0."""


class PositivityViolation(ExochemoError, ValueError):
    """Initial data would have a negative density or concentration."""


class LinearSolveFailure(ExochemoError):
    """A tridiagonal solve hit a zero pivot or produced non-finite output."""


class StepSizeError(ExochemoError, ValueError):
    """The time step violates the stability restriction of the IMEX scheme."""


class StepperError(ExochemoError):
    """Wraps a failure raised while advancing a trajectory."""

    def __init__(self, message, *, t):
        super().__init__(f"{message} (at t={t:.6g})")
        self.t = t


class MassMismatch(ExochemoError):
    """The anti-derivative of u - reference does not vanish at x = 1."""


class InsufficientData(ExochemoError, ValueError):
    """Too few usable samples for a decay fit or convergence study."""


class ConfigError(ExochemoError, ValueError):
    """Experiment configuration failed validation."""
