"""Exception hierarchy shared across the package."""


class LFMimoError(Exception):
    """Base class for all package errors."""


class ValidationError(LFMimoError, ValueError):
    """An input violates a documented precondition."""


class DomainError(LFMimoError, ValueError):
    """A scalar argument lies outside the domain of a formula."""


class ConfigError(LFMimoError, ValueError):
    """An experiment or system configuration is inconsistent or infeasible."""


class NumericalError(LFMimoError, ArithmeticError):
    """A numerical routine failed (ill-conditioning, non-finite values, ...)."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context
