"""Exception hierarchy shared by all cascade modules."""


class CascadeError(Exception):
    """Base class for every error raised by the package."""


class InvalidDimensionError(CascadeError, ValueError):
    pass


class InvalidLevelError(CascadeError, ValueError):
    pass


class SpaceMismatchError(CascadeError, ValueError):
    pass


class NotADensityMatrixError(CascadeError, ValueError):
    pass


class InvalidRegimeError(CascadeError, ValueError):
    """Parameters fall outside the regime where the cascaded scheme is defined."""


class SingularDetuningError(CascadeError, ZeroDivisionError):
    pass


class DegenerateDetuningError(CascadeError, ValueError):
    """Two physically distinct Fourier branches land on the same frequency."""


class RateError(CascadeError, ValueError):
    pass


class IntegrationError(CascadeError, RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t = {t:.6e} s)")
        self.t = t


class AbortedTrajectoryError(IntegrationError):
    """A stored density matrix broke trace, Hermiticity or positivity bounds."""


class ConfigError(CascadeError, ValueError):
    pass
