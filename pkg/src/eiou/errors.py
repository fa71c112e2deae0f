"""Exception hierarchy shared by every module and the CLI."""


class EIoUError(Exception):
    """Base class for all errors raised by this package."""


class InvalidBox(EIoUError, ValueError):
    pass


class DegenerateBox(InvalidBox):
    """Width or height is not strictly positive."""


class NonFinite(InvalidBox):
    """A coordinate is NaN or infinite."""


class InvalidPower(EIoUError, ValueError):
    pass


class DomainError(EIoUError, ValueError):
    """A loss was evaluated outside the domain of its base function."""


class EmptySample(EIoUError, ValueError):
    pass


class EmptyInput(EIoUError, ValueError):
    pass


class ParseError(EIoUError, ValueError):
    """Malformed textual input; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateStep(EIoUError, RuntimeError):
    """An optimizer update produced an invalid box.

    The partial trace up to (and excluding) the failing update is attached
    as ``trace`` so callers can inspect what happened.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NotFound(EIoUError):
    """A bounded search exhausted its budget without a witness."""
