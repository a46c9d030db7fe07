"""
Exceptions raised by the motion_emd package.
"""


class MotionEmdError(Exception):
    """Base class for every error raised by the package"""
    pass


class InvalidFrameError(MotionEmdError):
    """A frame has bad dimensions or non-finite / out-of-range pixels"""
    pass


class DimensionMismatchError(MotionEmdError, ValueError):
    """Two inputs that must share a shape do not"""
    pass


class InvalidFlowError(MotionEmdError):
    """A flow field is malformed or holds non-finite displacements"""
    pass


class SignalError(MotionEmdError):
    """A 1-D signal handed to the EMD code is too short or non-finite"""
    pass


class InsufficientExtremaError(MotionEmdError):
    """Not enough extrema to build a spline envelope"""
    pass


class StaleCacheError(MotionEmdError):
    """backward() received a cache produced before the last parameter update"""
    pass


class NonFiniteGradientError(MotionEmdError):
    """An optimizer step was refused because a gradient is NaN or infinite"""
    pass


class TrainingError(MotionEmdError):
    """Training cannot start or diverged"""
    pass


class DatasetError(MotionEmdError):
    """Manifest, frame files or split discipline problems"""
    pass


class ConfigError(MotionEmdError):
    """Configuration file unreadable or holding invalid entries"""
    pass


class UsageError(MotionEmdError):
    """Command line misuse"""
    pass
