from motionguide.alignment.shape_alignment import (
    AlignedSequence,
    MotionFrame,
    MotionSequence,
    PixelRect,
    align_sequence,
    fit_camera_scale,
)

__all__ = [
    "AlignedSequence",
    "MotionFrame",
    "MotionSequence",
    "PixelRect",
    "align_sequence",
    "fit_camera_scale",
]
