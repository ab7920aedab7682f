"""Exception types raised across the package."""


class MclabError(Exception):
    """Base class for all package errors."""


class ArgumentError(MclabError, ValueError):
    """An argument violates a precondition (shape, range, structure)."""


class DimensionError(ArgumentError):
    """Empty or mismatched matrix dimensions."""


class NumericError(MclabError, ArithmeticError):
    """Non-finite input where finite values are required."""


class DivergenceError(MclabError):
    """An iterative solver produced a non-finite or exploding iterate.

    Attributes
    ----------
    t : int
        Last iteration index whose iterate was finite and accepted.
    member : int or None
        Leave-one-out member index, when raised from a family run.
    """

    def __init__(self, message, t, member=None):
        super().__init__(message)
        self.t = t
        self.member = member


class ConvergenceError(MclabError):
    """An iteration hit its budget before meeting its tolerance.

    Attributes
    ----------
    estimate : float
        Last estimate (operator norm, residual, ...) when the budget ran out.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class DegenerateIterateError(MclabError):
    """An iterate lost rank where a full rank-r factorization was needed."""


class GenerationError(MclabError):
    """A random instance generator could not satisfy its premise."""
