"""Exception hierarchy shared by all fastdiff modules.

Two broad failure families matter to callers: bad inputs (ConfigError) and
numerical breakdowns (NumericalError and subclasses).  The CLI maps them to
distinct exit codes, so library code should raise these rather than bare
ValueError wherever the distinction is meaningful.
"""


class FastDiffError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FastDiffError):
    """Invalid parameters, config files, or preconditions on inputs."""


class NumericalError(FastDiffError):
    """A numerical procedure failed to produce a usable result."""


class ConvergenceError(NumericalError):
    """An iteration exhausted its budget without meeting its tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class BlowUpError(NumericalError):
    """A quantity exceeded the runaway-growth guard during time stepping."""

    def __init__(self, message, t=None, value=None):
        super().__init__(message)
        self.t = t
        self.value = value


class StepSizeError(NumericalError):
    """Adaptive step control drove the step size below the useful range."""
