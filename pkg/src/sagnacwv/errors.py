"""Exception types raised across the package."""


class SagnacError(Exception):
    """Base class for all package errors."""


class NonPositiveLeverArm(SagnacError, ValueError):
    pass


class DegeneratePhi(SagnacError, ValueError):
    """Raised where a time shift or inversion is undefined at phi = 0."""


class ConfigMismatch(SagnacError, ValueError):
    pass


class InvalidWindow(SagnacError, ValueError):
    pass


class MisalignedWindow(SagnacError, ValueError):
    pass


class DegenerateData(SagnacError, ValueError):
    pass


class AmplitudeRatioOutOfRange(SagnacError, ValueError):
    pass


class TooFewSamples(SagnacError, ValueError):
    pass


class NoValidPoints(SagnacError, ValueError):
    pass


class ConfigError(SagnacError, ValueError):
    """Bad or unknown configuration key/value."""
