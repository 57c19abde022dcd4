"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every failure a user can trigger
should end up as one of these.
"""


class GibbsLabError(Exception):
    """Base class."""


class ParameterError(GibbsLabError, ValueError):
    """Bad argument value (negative kappa, eta out of range, ...)."""


class DomainError(GibbsLabError, ValueError):
    """Argument outside the domain where a quantity is defined."""


class RangeError(GibbsLabError, ArithmeticError):
    """A scalar function overflowed on part of a spectrum."""


class InvariantViolation(GibbsLabError, AssertionError):
    """An internal consistency check failed."""


class ResourceCapError(GibbsLabError, MemoryError):
    """A configured size cap would be exceeded."""


class ConfigError(GibbsLabError, ValueError):
    """Malformed experiment configuration."""


class ConvergenceError(GibbsLabError, RuntimeError):
    """Iteration or quadrature failed to settle."""
