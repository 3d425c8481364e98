"""Exception hierarchy shared by every module."""


class SoftmodeError(Exception):
    """Base class for all package errors."""


class ParameterError(SoftmodeError, ValueError):
    pass


class DimensionError(SoftmodeError, ValueError):
    pass


class SizeError(DimensionError):
    pass


class AliasingError(ParameterError):
    pass


class SingularNoiseError(SoftmodeError, ValueError):
    """Raised when a score is requested at t <= 0, where sigma^2 vanishes."""


class DegenerateFieldError(SoftmodeError, ValueError):
    pass


class DivergenceError(SoftmodeError, FloatingPointError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NoTransitionError(SoftmodeError):
    pass


class EstimationError(SoftmodeError):
    pass


class UndefinedTestError(SoftmodeError):
    pass


class ConfigError(SoftmodeError):
    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line
