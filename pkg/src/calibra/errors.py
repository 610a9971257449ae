"""Exception hierarchy shared by all calibra modules."""


class CalibraError(Exception):
    """Base class for every error raised by calibra."""


class DomainError(CalibraError, ValueError):
    """A point lies outside the set where an operation is defined."""


class ParameterError(CalibraError, ValueError):
    """Construction parameters violate a stated validity condition."""


class PreconditionError(CalibraError, ValueError):
    """An operation was called on inputs that violate its precondition."""


class ConfigurationError(CalibraError, ValueError):
    """Inconsistent or incomplete configuration (grids, sample sets, CLI)."""


class EvaluationError(CalibraError, ArithmeticError):
    """A piece evaluator produced a non-finite value inside its region."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class NumericError(CalibraError, ArithmeticError):
    """An iterative or quadrature procedure failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SizeError(CalibraError, ValueError):
    """Instance too large for exhaustive enumeration."""
