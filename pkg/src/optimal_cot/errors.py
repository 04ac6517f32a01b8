"""Exception types shared across the package."""


class OptimalCotError(Exception):
    """Base class for all package errors."""


class DomainError(OptimalCotError, ValueError):
    """Input lies outside the domain of a function."""


class ConvergenceError(OptimalCotError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class InfeasibleError(OptimalCotError, ValueError):
    """Step count too small for the task: N * M <= T."""


class BoundInapplicableError(OptimalCotError, ValueError):
    """The general-error lower bound is undefined for this noise level."""


class MalformedStreamError(OptimalCotError, ValueError):
    """A token stream could not be parsed.

    Attributes:
        position: index of the offending token (or character).
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class PruningViolationError(OptimalCotError, ValueError):
    """A '+' node has no numeric leaf child."""


class UnresolvableLengthError(OptimalCotError, ValueError):
    """Candidates carry neither a length nor a text to segment."""

    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__(f"candidates without length or text: {', '.join(self.ids)}")


class EmptyPoolError(OptimalCotError, ValueError):
    """Voting was asked to pick from zero candidates."""
