"""Exception hierarchy shared by all modules."""


class MatwaveError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(MatwaveError, ValueError):
    pass


class RankDeficient(MatwaveError, ValueError):
    pass


class PoleError(MatwaveError, ValueError):
    pass


class WallachViolation(MatwaveError, ValueError):
    pass


class ConvergenceRegion(MatwaveError, ValueError):
    pass


class NonFinite(MatwaveError, FloatingPointError):
    pass


class EmptyInterval(MatwaveError, ValueError):
    pass


class TailMass(MatwaveError, ValueError):
    pass


class OutOfExtent(MatwaveError, ValueError):
    pass


class IncompatibleParams(MatwaveError, ValueError):
    pass


class NotRadial(MatwaveError, ValueError):
    pass


class FrameDimension(MatwaveError, ValueError):
    pass


class BadBand(MatwaveError, ValueError):
    pass


class ResolutionError(MatwaveError, ValueError):
    pass


class NoConvergence(MatwaveError, RuntimeError):
    pass


class NotSquareIntegrable(MatwaveError, ValueError):
    pass


class ConfigError(MatwaveError, ValueError):
    pass


class UnknownSuite(ConfigError):
    pass


class UnknownTransform(ConfigError):
    pass


class UnknownMethod(ConfigError):
    pass
