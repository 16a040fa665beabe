class PersuasionError(Exception):
    """Base class for all errors raised by this package."""


class NumericalFailure(PersuasionError):
    pass


class NotAMember(PersuasionError):
    pass


class NotInImage(PersuasionError):
    pass


class ZeroProbabilitySignal(PersuasionError):
    pass


class ConvergenceFailure(PersuasionError):
    """Raised when an iterative solver stops without its certificate.

    ``best`` carries the best iterate found and ``residual`` its
    stationarity residual, so callers may still use the result.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class EllipsoidIterationLimit(PersuasionError):
    def __init__(self, message, best_point=None, best_value=None):
        super().__init__(message)
        self.best_point = best_point
        self.best_value = best_value


class ConfigError(PersuasionError):
    pass


class InstanceValidationError(PersuasionError):
    pass


class ParamError(PersuasionError):
    pass
