"""Exception types raised by :mod:`lgeom`."""


class LGError(Exception):
    """Base class for all package errors."""


class DomainError(LGError, ValueError):
    """An argument lies outside the domain of the function."""


class ParameterError(LGError, ValueError):
    """Distribution parameters are invalid for the requested operation."""


class ConvergenceError(LGError, RuntimeError):
    """An iterative procedure hit its iteration or term cap."""


class TailError(LGError, ArithmeticError):
    """A conditioning probability underflowed, so the ratio is meaningless."""


class SingularInformationError(LGError, ArithmeticError):
    """The observed information matrix could not be inverted."""


class DataValidationError(LGError, ValueError):
    """Input data failed validation.

    ``problems`` holds ``(line_number, message)`` pairs when available.
    """

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])
