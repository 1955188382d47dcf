"""Exception hierarchy shared by every module of the package."""


class MeanKingError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(MeanKingError, ValueError):
    """A parameter violates a documented constraint (grid size, widths, flags)."""


class DomainError(MeanKingError, ValueError):
    """A physical parameter falls outside the region the grid can represent."""


class DegeneratePostselectionError(MeanKingError, ArithmeticError):
    """Pre- and post-selected states are numerically orthogonal."""


class DivergentIntegralError(MeanKingError, ArithmeticError):
    """A Gaussian integral was requested whose real part is not positive definite."""
