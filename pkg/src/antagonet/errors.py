"""Exception types raised by the analysis routines."""


class HypothesisError(ValueError):
    """A structural hypothesis (spanning tree, spanning forest, ...) fails."""


class ConfigError(ValueError):
    """Invalid system configuration (zero scaling, bad dimensions, ...)."""


class DegenerateSpectrumError(ValueError):
    """The spectrum does not have the shape an operation requires."""


class NotCertifiableError(ValueError):
    """An error matrix cannot be split into unit and contractive parts."""


class NumericalError(ArithmeticError):
    """Two independent computations disagree beyond tolerance."""
