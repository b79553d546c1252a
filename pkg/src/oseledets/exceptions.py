"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class OseledetsError(Exception):
    """Base class for library errors."""


class DimensionMismatchError(OseledetsError, ValueError):
    """A vector or matrix does not fit the fiber it is applied to."""


class DependentBasisError(OseledetsError, ValueError):
    """A basis fails the volume-based independence test."""


class UnresolvedLevelError(OseledetsError):
    """A filtration level cannot be separated at the requested horizon."""


class UnconvergedError(OseledetsError):
    """An iterative estimate did not converge within its budget.

    The partial log is attached so that callers can report it.
    """

    def __init__(self, message: str, log: list | None = None) -> None:
        super().__init__(message)
        self.log = list(log or [])


class BoundViolation(OseledetsError):
    """A checked inequality failed. ``bound`` names the inequality."""

    def __init__(self, bound: str, message: str) -> None:
        super().__init__(f"{bound}: {message}")
        self.bound = bound


class NonHyperbolicError(OseledetsError):
    """A check that needs a hyperbolic spectrum was asked on one that is not."""


class ConfigError(OseledetsError, ValueError):
    """Invalid experiment configuration."""
