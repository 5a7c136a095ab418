"""
motionguide/render/skeleton.py
Skeleton layer: projected body joints drawn as coloured bones and discs.

A pixel is lit by a bone iff its centre lies within ``bone_width / 2`` of the
projected segment, and by a joint iff within ``joint_radius`` of the projected
joint. Lit pixels get alpha in [0.5, 1], ramping down over the last half pixel
of the shape. Bones are drawn first in list order, joints on top.
"""

from typing import Sequence, Tuple

import numpy as np

from motionguide.core.exceptions import DimensionError, InvalidArgumentError
from motionguide.render.camera import Camera, project_points

# One colour per bone / joint index, cycling; RGB in [0, 1].
SKELETON_PALETTE = (
    np.array(
        [
            [255, 0, 0],
            [255, 85, 0],
            [255, 170, 0],
            [255, 255, 0],
            [170, 255, 0],
            [85, 255, 0],
            [0, 255, 0],
            [0, 255, 85],
            [0, 255, 170],
            [0, 255, 255],
            [0, 170, 255],
            [0, 85, 255],
            [0, 0, 255],
            [85, 0, 255],
            [170, 0, 255],
            [255, 0, 255],
            [255, 0, 170],
            [255, 0, 85],
        ],
        dtype=np.float64,
    )
    / 255.0
)

DEFAULT_BONE_WIDTH = 3.0
DEFAULT_JOINT_RADIUS = 4.0


def bone_color(index: int) -> np.ndarray:
    return SKELETON_PALETTE[index % len(SKELETON_PALETTE)]


def joint_color(index: int) -> np.ndarray:
    # offset so a joint does not share the colour of the bone ending at it
    return SKELETON_PALETTE[(index + len(SKELETON_PALETTE) // 2) % len(SKELETON_PALETTE)]


def _coverage(distance: np.ndarray, half_extent: float) -> np.ndarray:
    alpha = np.clip(half_extent + 0.5 - distance, 0.0, 1.0)
    return np.where(distance <= half_extent, alpha, 0.0)


def _window(cx0, cx1, cy0, cy1, pad, width, height):
    j0 = max(int(np.floor(min(cx0, cx1) - pad)), 0)
    j1 = min(int(np.ceil(max(cx0, cx1) + pad)), width - 1)
    i0 = max(int(np.floor(min(cy0, cy1) - pad)), 0)
    i1 = min(int(np.ceil(max(cy0, cy1) + pad)), height - 1)
    return i0, i1, j0, j1


def _blend(layer, i0, i1, j0, j1, alpha, color):
    region = layer[i0 : i1 + 1, j0 : j1 + 1]
    a = alpha[..., None]
    region[:] = region * (1.0 - a) + color * a


def segment_distance(px, py, a: Tuple[float, float], b: Tuple[float, float]) -> np.ndarray:
    """Distance from points (px, py) to the closed segment a-b."""
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0:
        return np.hypot(px - ax, py - ay)
    s = np.clip(((px - ax) * dx + (py - ay) * dy) / length_sq, 0.0, 1.0)
    return np.hypot(px - (ax + s * dx), py - (ay + s * dy))


def render_skeleton(
    joints: np.ndarray,
    bones: Sequence[Tuple[int, int]],
    camera: Camera,
    width: int,
    height: int,
    bone_width: float = DEFAULT_BONE_WIDTH,
    joint_radius: float = DEFAULT_JOINT_RADIUS,
) -> np.ndarray:
    """
    Draws the skeleton layer.

    Args:
        joints: K x 3 world joint positions.
        bones: (parent, child) index pairs.
        camera: Pinhole camera.
        width: Image width.
        height: Image height.
        bone_width: Line width in pixels.
        joint_radius: Disc radius in pixels.

    Returns:
        H x W x 3 layer with values in [0, 1], black background.
    """
    if width <= 0 or height <= 0:
        raise InvalidArgumentError(f"image size must be positive, got {width}x{height}")
    layer = np.zeros((height, width, 3))
    joints = np.asarray(joints, dtype=np.float64).reshape(-1, 3)
    if len(joints) == 0:
        return layer
    for parent, child in bones:
        if not (0 <= parent < len(joints) and 0 <= child < len(joints)):
            raise DimensionError(f"bone ({parent}, {child}) indexes past {len(joints)} joints")

    u, v, _, visible = project_points(camera, joints)

    half = bone_width / 2.0
    for index, (parent, child) in enumerate(bones):
        if not (visible[parent] and visible[child]):
            continue
        i0, i1, j0, j1 = _window(u[parent], u[child], v[parent], v[child], half + 1, width, height)
        if i0 > i1 or j0 > j1:
            continue
        px, py = np.meshgrid(np.arange(j0, j1 + 1) + 0.5, np.arange(i0, i1 + 1) + 0.5)
        dist = segment_distance(px, py, (u[parent], v[parent]), (u[child], v[child]))
        _blend(layer, i0, i1, j0, j1, _coverage(dist, half), bone_color(index))

    for index in range(len(joints)):
        if not visible[index]:
            continue
        i0, i1, j0, j1 = _window(u[index], u[index], v[index], v[index], joint_radius + 1, width, height)
        if i0 > i1 or j0 > j1:
            continue
        px, py = np.meshgrid(np.arange(j0, j1 + 1) + 0.5, np.arange(i0, i1 + 1) + 0.5)
        dist = np.hypot(px - u[index], py - v[index])
        _blend(layer, i0, i1, j0, j1, _coverage(dist, joint_radius), joint_color(index))

    return layer
