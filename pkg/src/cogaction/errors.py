"""Exception hierarchy shared by every module."""


class CogActionError(Exception):
    """Base class for all errors raised by the package."""


class InputError(CogActionError, ValueError):
    """An argument was rejected before any computation (shape, range, kind)."""


class NumericDomainError(CogActionError, ArithmeticError):
    """A computation produced a non-finite value or left its valid domain."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class DivergenceError(NumericDomainError):
    """Integrator state became non-finite; ``time`` is the first bad stamp."""

    def __init__(self, message, time):
        super().__init__(message, where=time)
        self.time = time


class HypothesisViolation(CogActionError):
    """A theorem-mode hypothesis failed; ``hypothesis`` names which one."""

    def __init__(self, hypothesis, message):
        super().__init__(f"hypothesis violated ({hypothesis}): {message}")
        self.hypothesis = hypothesis


class ConfigurationError(CogActionError):
    """Parameters are individually valid but jointly unusable."""
