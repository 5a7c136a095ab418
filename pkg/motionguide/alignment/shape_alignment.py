"""
motionguide/alignment/shape_alignment.py
Parametric shape alignment: the driving motion's poses re-evaluated with the
reference subject's shape, plus a single camera correction that overlays the
rendered body on the reference subject's bounding box.
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from motionguide.body.body_model import (
    BodyModel,
    PosedMesh,
    PoseParams,
    ShapeParams,
    evaluate_body,
)
from motionguide.core.exceptions import (
    AlignmentError,
    DimensionError,
    InvalidArgumentError,
)
from motionguide.render.camera import Camera, project_points

MIN_PROJECTED_HEIGHT = 1e-9


@dataclass(frozen=True)
class PixelRect:
    """Axis-aligned pixel rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self):
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def to_list(self) -> List[float]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class MotionFrame:
    pose: PoseParams
    camera: Camera


@dataclass(frozen=True)
class MotionSequence:
    """A driving video's parametric record: per-frame pose and camera."""

    frames: tuple
    source_shape: ShapeParams
    fps: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.fps > 0:
            raise InvalidArgumentError(f"fps must be positive, got {self.fps}")
        joint_counts = {frame.pose.theta.shape[0] for frame in self.frames}
        if len(joint_counts) > 1:
            raise DimensionError(f"frames disagree on joint count: {sorted(joint_counts)}")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class AlignedSequence:
    """Motion frames paired with the single reference shape that renders them."""

    shape: ShapeParams
    frames: tuple
    fps: float = 30.0
    source_shape: Optional[ShapeParams] = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)

    def as_motion(self) -> MotionSequence:
        return MotionSequence(frames=self.frames, source_shape=self.shape, fps=self.fps)

    def with_cameras(self, cameras: Sequence[Camera]) -> "AlignedSequence":
        frames = tuple(replace(f, camera=c) for f, c in zip(self.frames, cameras))
        return replace(self, frames=frames)


def align_sequence(
    beta_ref: ShapeParams, motion: MotionSequence, model: Optional[BodyModel] = None
) -> AlignedSequence:
    """
    Transfers the reference shape onto every frame of the motion.

    Poses and cameras are carried over unchanged; only the shape is replaced.

    Args:
        beta_ref: Shape of the reference subject.
        motion: Driving motion.
        model: When given, dimensions are checked against it.

    Returns:
        AlignedSequence with the same frame count as ``motion``.
    """
    if len(motion.frames) == 0:
        raise InvalidArgumentError("cannot align an empty motion sequence")
    expected_shape = model.num_shape if model is not None else motion.source_shape.beta.shape[0]
    if beta_ref.beta.shape[0] != expected_shape:
        raise DimensionError(
            f"reference shape has {beta_ref.beta.shape[0]} coefficients, expected {expected_shape}"
        )
    if model is not None and motion.frames[0].pose.theta.shape[0] != model.num_joints:
        raise DimensionError(
            f"motion has {motion.frames[0].pose.theta.shape[0]} joints, model has {model.num_joints}"
        )
    logger.info(f"Aligned {len(motion.frames)} frames to the reference shape")
    return AlignedSequence(
        shape=beta_ref,
        frames=motion.frames,
        fps=motion.fps,
        source_shape=motion.source_shape,
    )


def posed_meshes(model: BodyModel, aligned: AlignedSequence) -> List[PosedMesh]:
    """Evaluates the body of every aligned frame."""
    return [evaluate_body(model, aligned.shape, frame.pose) for frame in aligned.frames]


def projected_bbox(mesh: PosedMesh, camera: Camera) -> Optional[PixelRect]:
    """Bounding box of the projected visible vertices, or None if none are visible."""
    if len(mesh.vertices) == 0:
        return None
    u, v, _, visible = project_points(camera, mesh.vertices)
    if not visible.any():
        return None
    u, v = u[visible], v[visible]
    return PixelRect(float(u.min()), float(v.min()), float(u.max()), float(v.max()))


def fit_camera_scale(
    reference_bbox: PixelRect,
    aligned: AlignedSequence,
    model: BodyModel,
    frame_index: int = 0,
) -> AlignedSequence:
    """
    Rescales every frame's camera so the anchor frame's body matches the
    reference bounding box height, then shifts the principal point so the box
    centres coincide.

    One scale s = reference height / projected height and one principal-point
    shift, both measured on ``frame_index``, are applied to all frames.

    Raises:
        InvalidArgumentError: Empty reference box, bad frame index or invalid
            anchor camera.
        AlignmentError: The anchor frame projects to a zero-height box.
    """
    if reference_bbox.width <= 0 or reference_bbox.height <= 0:
        raise InvalidArgumentError(
            f"reference bbox must have positive size, got {reference_bbox.to_list()}"
        )
    if not 0 <= frame_index < len(aligned.frames):
        raise InvalidArgumentError(
            f"frame_index {frame_index} outside [0, {len(aligned.frames)})"
        )

    anchor = aligned.frames[frame_index]
    anchor.camera.validate()
    mesh = evaluate_body(model, aligned.shape, anchor.pose)
    bbox = projected_bbox(mesh, anchor.camera)
    if bbox is None or bbox.height <= MIN_PROJECTED_HEIGHT:
        raise AlignmentError(
            f"frame {frame_index} projects to a degenerate bounding box; cannot fit camera scale"
        )

    s = reference_bbox.height / bbox.height
    target_u, target_v = reference_bbox.center
    center_u, center_v = bbox.center

    cameras = []
    for frame in aligned.frames:
        # scaling about the principal point moves the anchor centre to cx + s (u - cx)
        scaled_u = anchor.camera.cx + s * (center_u - anchor.camera.cx)
        scaled_v = anchor.camera.cy + s * (center_v - anchor.camera.cy)
        cameras.append(
            replace(
                frame.camera.scaled(s),
                cx=frame.camera.cx + (target_u - scaled_u),
                cy=frame.camera.cy + (target_v - scaled_v),
            )
        )
    logger.info(
        f"Camera scale fitted on frame {frame_index}: s={s:.6f}, "
        f"projected height {bbox.height:.2f}px -> {reference_bbox.height:.2f}px"
    )
    return aligned.with_cameras(cameras)
