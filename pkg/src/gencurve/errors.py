"""Exception hierarchy.

``PreconditionError`` subclasses map to CLI exit code 2, ``NumericalError``
subclasses to exit code 3.
"""


class GencurveError(Exception):
    """Base class for all package errors."""


class PreconditionError(GencurveError, ValueError):
    """Inputs violate an operation's contract."""


class NumericalError(GencurveError, ArithmeticError):
    """A numerical procedure failed on valid inputs."""


class UnsupportedFamily(PreconditionError):
    pass


class DomainError(PreconditionError):
    pass


class PreconditionViolated(PreconditionError):
    pass


class NotATurningPoint(PreconditionError):
    pass


class InvalidRoot(PreconditionError):
    pass


class NoSignChange(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class NoRootFound(NumericalError):
    pass
