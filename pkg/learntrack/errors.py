"""Exceptions raised by learntrack.

Every error knows the exit code the command line reports for it:
0 ok, 2 configuration, 3 runtime fault, 4 infeasible closed loop.
"""


class LearnTrackError(Exception):
    """Base class of all learntrack errors."""
    exit_code = 3


class InputError(LearnTrackError, ValueError):
    """Argument violates an operation's precondition (shape, sign, range)."""


class ConfigError(LearnTrackError):
    """Experiment configuration is invalid.

    `field` holds the dotted path of the offending entry, e.g. "plant.step_seconds".
    """
    exit_code = 2

    def __init__(self, field, message):
        self.field = field
        self.message = message
        LearnTrackError.__init__(self, "{}: {}".format(field, message))


class FittingError(LearnTrackError):
    """Regularized Gram matrix could not be factorized."""

    def __init__(self, message, min_pivot=None):
        self.min_pivot = min_pivot
        LearnTrackError.__init__(self, message)


class NumericalError(LearnTrackError):
    """A computed quantity failed its consistency check."""


class SynthesisError(LearnTrackError):
    """Gains cannot be placed for the given pair (uncontrollable/unobservable)."""


class InfeasibleError(LearnTrackError):
    """Error dynamics are not Schur; no Lyapunov certificate exists."""
    exit_code = 4


class PropagationError(LearnTrackError):
    """Plant or reference produced or received a non-finite value."""


class ControllerFault(LearnTrackError):
    """Control law or observer produced a non-finite value."""


class StageError(LearnTrackError):
    """A pipeline stage failed. Wraps the original error."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)
        LearnTrackError.__init__(self, "stage {} failed: {}".format(stage, cause))
