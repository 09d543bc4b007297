"""Exception hierarchy. The CLI maps each category to its own exit code."""


class CavityControlError(Exception):
    exit_code = 1


class ConfigurationError(CavityControlError):
    """Inconsistent inputs: shape mismatches, unresolved grids, broken cross-references."""

    exit_code = 2


class ValidationError(CavityControlError, ValueError):
    """A value violates a documented bound or invariant."""

    exit_code = 3

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems) if problems else [message]


class DomainError(CavityControlError, ValueError):
    """Formula evaluated outside its physical domain (e.g. above lasing threshold)."""

    exit_code = 4


class NumericError(CavityControlError, ArithmeticError):
    """Overflow, NaN, divergence or a tolerance that could not be met."""

    exit_code = 5


class UsageError(CavityControlError):
    """API misuse: bad index, missing stage output."""

    exit_code = 6
