"""Exception types raised across the package."""


class MsslError(Exception):
    """Base class for all package errors."""


class DegeneratePair(MsslError, ValueError):
    """Two samples are (near) half a rotation apart; the sinusoid is not determined."""


class ZeroSignal(MsslError, ValueError):
    """Both samples are zero, so the phase is undefined."""


class EmptyScene(MsslError, ValueError):
    pass


class ConstraintUnsatisfiable(MsslError, RuntimeError):
    pass


class InsufficientData(MsslError, ValueError):
    pass


class DelayOutOfRange(MsslError, ValueError):
    pass


class MismatchedRates(MsslError, ValueError):
    pass


class FrameTooShort(MsslError, ValueError):
    pass


class ConfigError(MsslError, ValueError):
    """Malformed scene, signal or evaluation configuration."""
