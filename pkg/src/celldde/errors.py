"""Exception hierarchy shared by all celldde modules."""


class CellDDEError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CellDDEError, ValueError):
    """An ingredient was evaluated outside of its domain ``J x I``."""


class GeometryInfeasible(CellDDEError):
    """The maturation box cannot satisfy the bounds on ``g``."""


class NoCrossing(CellDDEError):
    """The maturation path did not reach ``x1`` before ``s = h``."""


class PathEscape(CellDDEError):
    """The maturation path left ``[x2 - b, x2 + b]``."""


class NoConvergence(CellDDEError):
    """A fixed-point iteration exhausted its iteration budget."""


class NegativityIntroduced(CellDDEError):
    """A history correction produced negative values."""


class NonFiniteState(CellDDEError):
    """The integrator produced a NaN or infinite state."""


class DegenerateCoefficient(CellDDEError):
    """The recruitment coefficient at a candidate equilibrium is not positive."""


class ConfigError(CellDDEError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(ConfigError, ValueError):
    """A configuration value violates a model invariant."""
