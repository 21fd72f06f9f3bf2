"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigParseError(ConfigError):
    """A config file could not be parsed at all."""


class ConfigValidationError(ConfigError):
    """A parsed config violates an invariant; the message names the field."""


class SolverFailure(RuntimeError):
    """Base class for optimization failures."""


class InfeasibleError(SolverFailure):
    """The problem was certified infeasible by the conic solver."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class NonConvergenceError(SolverFailure):
    """A solver hit its iteration cap or failed its accuracy check.

    ``best`` carries the best iterate found, when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PenaltyFailureError(SolverFailure):
    """The power-slack penalty failed to drive the slack to zero."""


class UnboundedProgramError(SolverFailure):
    """The level program is unbounded for the given penalty weight."""


class NumericalError(RuntimeError):
    """A numerical precondition failed, e.g. an indefinite matrix square root."""


class UnsupportedDimensionError(ValueError):
    """An oracle was requested outside its supported dimension range."""


class DegradedSolutionWarning(UserWarning):
    """Rank-one extraction fell short of the matrix-relaxation value."""
