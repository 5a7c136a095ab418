"""
motionguide/core/exceptions.py - Exception hierarchy shared by every module
"""

from motionguide.core.enums import ExitCode


class MotionGuideError(Exception):
    """Base exception for motionguide errors."""

    exit_code: ExitCode = ExitCode.NUMERIC_FAILURE


class ValidationError(MotionGuideError):
    """Raised when inputs, files or settings fail validation."""

    exit_code = ExitCode.VALIDATION_ERROR


class InvalidArgumentError(ValidationError):
    """Raised when a scalar argument is out of its allowed range or not finite."""


class DimensionError(ValidationError):
    """Raised when array or tensor shapes do not agree."""


class ConfigurationError(ValidationError):
    """Raised when there is an issue with the application configuration."""


class ModelFormatError(ValidationError):
    """Raised when a binary container or motion document is malformed or violates an invariant."""


class MissingInputError(ValidationError):
    """Raised when required input files or frames are missing."""


class StorageError(MotionGuideError):
    """Raised when reading or writing files fails."""

    exit_code = ExitCode.IO_ERROR


class NumericError(MotionGuideError):
    """Raised when a numeric procedure cannot produce a result."""

    exit_code = ExitCode.NUMERIC_FAILURE


class AlignmentError(NumericError):
    """Raised when camera alignment hits a degenerate projection."""
