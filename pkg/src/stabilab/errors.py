"""Exception hierarchy shared by all modules."""


class StabilabError(Exception):
    """Base class for errors raised by this package."""


class InputError(StabilabError, ValueError):
    """Malformed input: wrong shape, non-finite entries, bad config keys."""


class ParameterError(StabilabError, ValueError):
    """Parameters violate a documented constraint."""


class DomainError(StabilabError, ValueError):
    """Input lies outside the domain of a matrix function."""


class NumericError(StabilabError, ArithmeticError):
    """A numerical procedure failed to converge or overflowed."""
