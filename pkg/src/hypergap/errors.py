"""Exception hierarchy shared by every module."""


class HypergapError(Exception):
    """Base class."""


class DomainError(HypergapError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class IntegrabilityError(HypergapError, ArithmeticError):
    """An improper integral does not converge (or its tail cannot be modelled)."""


class ConvergenceError(HypergapError, ArithmeticError):
    """An iterative method ran out of iterations."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ExtrapolationError(HypergapError, ValueError):
    """Evaluation requested outside the span of a sampled object."""


class ConstraintError(HypergapError, ValueError):
    """A normalisation constraint required by a functional is violated."""


class NotVanishingError(HypergapError, ValueError):
    """A function whose level sets have infinite measure cannot be rearranged."""
