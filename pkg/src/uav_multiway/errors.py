"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent simulation/CLI configuration."""


class InfeasibleAllocationError(ValueError):
    """Raised when a stream allocation cannot be realized by beamformers."""


class DegenerateChannelError(RuntimeError):
    """Raised when a channel draw violates a generic rank condition.

    These are measure-zero events for continuous fading; the simulation
    harness discards and resamples the affected trial.
    """


class NumericalFailureError(RuntimeError):
    """Raised when an iterative routine does not converge.

    Attributes
    ----------
    last_iterate : object
        The state reached when the iteration budget ran out.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
