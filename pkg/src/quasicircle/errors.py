"""Exception types shared across the package."""


class QuasicircleError(Exception):
    """Base class; ``payload`` carries diagnostics for reports."""

    def __init__(self, message, **payload):
        super().__init__(message)
        self.payload = payload


class InvalidCurvatureError(QuasicircleError, ValueError):
    pass


class DomainError(QuasicircleError, ValueError):
    """A point lies outside the open unit disk or another admissible set."""


class ShapeError(QuasicircleError, ValueError):
    pass


class PreconditionError(QuasicircleError, ValueError):
    pass


class BudgetExceededError(QuasicircleError, RuntimeError):
    """Work budget exhausted; ``partial`` holds whatever was computed."""

    def __init__(self, message, partial=None, **payload):
        super().__init__(message, **payload)
        self.partial = partial


class NotFoundError(QuasicircleError, RuntimeError):
    pass


class OutOfRangeError(QuasicircleError, ValueError):
    pass


class FitFailureError(QuasicircleError, RuntimeError):
    pass


class UndefinedProductError(QuasicircleError, ValueError):
    pass


class TrackingError(QuasicircleError, RuntimeError):
    pass


class BoxExceededError(QuasicircleError, RuntimeError):
    pass


class SliceError(QuasicircleError, RuntimeError):
    pass


class NotApplicableError(QuasicircleError, ValueError):
    pass


class ConfigError(QuasicircleError, ValueError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, **payload):
        super().__init__(message, **payload)
        self.line = line
