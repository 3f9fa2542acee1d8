"""Exception types raised by the simulator."""


class InvalidArgumentError(ValueError):
    """An argument is outside its allowed domain."""


class InvalidStateError(ValueError):
    """A state is unnormalized or has the wrong shape for the operation."""


class ImpossibleOutcomeError(RuntimeError):
    """A detection outcome with (numerically) zero probability was requested."""


class UnsupportedConfigurationError(ValueError):
    """The operation is undefined for this sample configuration."""
