"""
motionguide/core/enums.py - Core enumerations
"""

from enum import Enum, IntEnum


class ExitCode(IntEnum):
    """Process exit codes of the command-line driver"""

    SUCCESS = 0
    VALIDATION_ERROR = 2
    IO_ERROR = 3
    NUMERIC_FAILURE = 4


class GuidanceCondition(str, Enum):
    """Guidance layers, declared in canonical fusion order"""

    DEPTH = "depth"
    NORMAL = "normal"
    SEMANTIC = "semantic"
    SKELETON = "skeleton"

    @classmethod
    def names(cls):
        return [member.value for member in cls]


class FusionMode(str, Enum):
    """How the fused guidance feature enters the denoiser"""

    ADD = "add"
    CONCAT = "concat"


class BlendWeighting(str, Enum):
    """Per-window frame weighting used by temporal aggregation"""

    TRIANGULAR = "triangular"
    UNIFORM = "uniform"
