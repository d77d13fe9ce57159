"""Exception hierarchy shared by the solvers, simulator and CLI."""


class WhittleAssocError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(WhittleAssocError, ValueError):
    """A parameter or configuration violates a documented invariant."""


class MissingInputError(WhittleAssocError, ValueError):
    """A required input (e.g. index tables for the Whittle policy) is absent."""


class NumericalFailureError(WhittleAssocError, ArithmeticError):
    """A linear solve or iteration failed to produce a trustworthy answer."""

    def __init__(self, message, residual=None, context=None):
        super().__init__(message)
        self.residual = residual
        self.context = context or {}


class NonConvergenceError(NumericalFailureError):
    """An iteration hit its iteration cap; carries the last two iterates."""

    def __init__(self, message, last_iterates=None, context=None):
        super().__init__(message, context=context)
        self.last_iterates = last_iterates


class DegenerateIndifferenceError(NumericalFailureError):
    """The indifference equation for the index has a vanishing denominator."""


class StructuralViolationError(WhittleAssocError):
    """An optimal action set was not of threshold form."""

    def __init__(self, message, actions=None):
        super().__init__(message)
        self.actions = actions
