"""Exception hierarchy shared by all modules."""


class PucciError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpecError(PucciError, ValueError):
    pass


class InvalidFunctionError(PucciError, ValueError):
    pass


class DivergenceError(PucciError, ArithmeticError):
    pass


class SingularPointError(PucciError, ValueError):
    pass


class ConfigurationError(PucciError, ValueError):
    pass


class DimensionError(PucciError, ValueError):
    pass


class ResolutionError(PucciError, ValueError):
    pass


class UnboundedFunctionError(PucciError, ArithmeticError):
    pass


class ClassMismatchError(PucciError, ValueError):
    pass


class SearchFailureError(PucciError):
    def __init__(self, message, best_margin=None):
        super().__init__(message)
        self.best_margin = best_margin


class ConstructionError(PucciError):
    pass


class NonConvergenceError(PucciError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CyclingError(NonConvergenceError):
    pass


class DegenerateFitError(PucciError):
    pass


class PreconditionError(PucciError, ValueError):
    pass
