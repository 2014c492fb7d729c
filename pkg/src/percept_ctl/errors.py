"""Exception types raised across the package."""


class PerceptCtlError(Exception):
    """Base class for every error raised by percept_ctl."""


class DimensionError(PerceptCtlError, ValueError):
    pass


class UnsupportedSizeError(PerceptCtlError, ValueError):
    pass


class ParameterError(PerceptCtlError, ValueError):
    pass


class SingularMatrixError(PerceptCtlError, ArithmeticError):
    """Raised when elimination meets a (numerically) zero pivot."""

    def __init__(self, message, pivot=0.0):
        super().__init__(f"{message} (pivot magnitude {pivot:.3e})")
        self.pivot = pivot


class RankError(SingularMatrixError):
    pass


class DivergenceError(PerceptCtlError, ArithmeticError):
    """A non-finite state appeared during integration."""

    def __init__(self, message, t_last):
        super().__init__(f"{message} (last finite state at t={t_last:.6g})")
        self.t_last = t_last


class UndefinedTauError(PerceptCtlError, ZeroDivisionError):
    pass


class ConeViolationError(PerceptCtlError, ValueError):
    """Heading outside the critical cone: a gaze ray misses its wall."""


class CriticalHeadingError(ConeViolationError):
    pass


class DomainError(PerceptCtlError, ValueError):
    pass


class NotControllableError(PerceptCtlError, ArithmeticError):
    def __init__(self, message, pattern=None):
        super().__init__(message)
        self.pattern = pattern


class ConsistencyError(PerceptCtlError, RuntimeError):
    pass


class NoSolutionError(PerceptCtlError, RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


class ConfigError(PerceptCtlError, ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)
