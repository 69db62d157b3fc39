"""Shared exception types."""


class TubelogError(Exception):
    """Base class for all tubelog-specific failures."""


class FormSyntaxError(TubelogError, ValueError):
    """Malformed form expression; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class FormNotRegularError(TubelogError, ValueError):
    """The 1-form is not regular and non-vanishing at infinity."""


class NonGenericError(TubelogError, ValueError):
    """The form fails the genericity conditions needed by a pipeline stage."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NumericalError(TubelogError, RuntimeError):
    """A numerical procedure failed to converge; carries location context."""

    def __init__(self, message: str, *, where=None, stage: str | None = None):
        super().__init__(message)
        self.where = where
        self.stage = stage
