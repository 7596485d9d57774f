"""Exception hierarchy shared by the solvers and the experiment layer."""


class FreeboundError(Exception):
    """Base class for every error raised by this package."""


class ReactionDomainError(FreeboundError, ValueError):
    """A reaction term was evaluated outside its domain (u < 0)."""


class ConfigError(FreeboundError, ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConvergenceError(FreeboundError):
    """An iteration did not converge; ``gap`` holds the last residual."""

    def __init__(self, message, gap=None, history=None):
        self.gap = gap
        self.history = history
        super().__init__(message)


class NoPositiveStateError(FreeboundError):
    """The periodic march collapsed to zero: no positive periodic state."""


class StepSizeError(FreeboundError):
    """A time step produced non-finite values."""


class DomainTooSmallError(FreeboundError):
    """A front came too close to the edge of a truncated domain."""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class ClassificationError(FreeboundError):
    """A speed measurement was requested on a run that did not spread."""


class InconclusiveError(FreeboundError):
    """A bisection probe could not be classified."""

    def __init__(self, message, c=None, diagnostics=None):
        self.c = c
        self.diagnostics = diagnostics
        super().__init__(message)


class BracketError(FreeboundError):
    """The initial bracket of a bisection shows no sign change."""


class PreconditionError(FreeboundError, ValueError):
    """An operation's precondition does not hold for its inputs."""
