"""Exception types raised across the package."""


class FQHError(Exception):
    """Base class for all package errors."""


class ConfigError(FQHError):
    """Invalid user input: malformed config, bad lattice or gauge parameters."""


class FluxNotQuantized(ConfigError):
    pass


class QuadratureFailure(FQHError):
    pass


class TooManyParticles(ConfigError):
    pass


class BasisMismatch(FQHError):
    pass


class PatternMismatch(FQHError):
    pass


class FillingMismatch(ConfigError):
    pass


class DimensionTooLarge(FQHError):
    pass


class NumericalError(FQHError):
    """Base class for failures of the numerical machinery (exit code 2)."""


class NoConvergence(NumericalError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NormDrift(NumericalError):
    pass


class ScheduleError(ConfigError):
    pass
