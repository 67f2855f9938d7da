"""Exception types shared across the package."""


class EmgTransError(Exception):
    """Base class for all package errors."""


class ParameterError(EmgTransError, ValueError):
    """An argument violates a documented precondition."""


class FormatError(EmgTransError, ValueError):
    """A file does not conform to its documented on-disk format."""


class NumericalError(EmgTransError, ArithmeticError):
    """A numerical procedure failed (e.g. singular covariance)."""


class EvaluationError(EmgTransError, RuntimeError):
    """A recording could not be evaluated end to end."""
