"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`ErgodriftError`.
Parameter problems are :class:`DomainError` (CLI exit code 2); broken internal
bookkeeping is :class:`InvariantError` (CLI exit code 3).
"""


class ErgodriftError(Exception):
    exit_code = 1


class DomainError(ErgodriftError, ValueError):
    """A parameter lies outside the domain where an operation is defined."""

    exit_code = 2


class NonInvertibleError(DomainError):
    pass


class ComplexityGuardError(DomainError):
    pass


class TruncationError(DomainError):
    pass


class InsufficientDataError(DomainError):
    pass


class InapplicableError(DomainError):
    pass


class BudgetError(DomainError):
    pass


class ConditioningError(DomainError):
    pass


class ConfigError(DomainError):
    pass


class InvariantError(ErgodriftError, RuntimeError):
    """An identity that holds by construction was found violated."""

    exit_code = 3


class DivergentInverseWarning(UserWarning):
    """The inverse kernel of an exponential family does not decay."""
