"""Exception hierarchy shared by all modules."""


class LevyOuError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(LevyOuError, ValueError):
    """A process parameter lies outside its admissible domain."""


class DomainError(LevyOuError, ValueError):
    """A complex argument lies outside the strip of analyticity."""


class PreconditionError(LevyOuError, ValueError):
    """An operation was requested for a law that does not support it."""


class QuadratureError(LevyOuError, ArithmeticError):
    """A numerical integral failed its refinement check."""


class DegenerateWindowError(LevyOuError, ArithmeticError):
    """The reconstructed CDF has too few monotone points to be usable."""


class TailFitError(LevyOuError, ArithmeticError):
    """The exponential tail extrapolation could not be anchored."""


class MartingaleError(LevyOuError, ValueError):
    """The exponential moment needed for the martingale drift does not exist."""


class ConfigError(LevyOuError, ValueError):
    """A run configuration is malformed or references unknown keys."""
