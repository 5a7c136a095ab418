"""
motionguide/render/rasterizer.py
Z-buffered software rasterization of a posed mesh into guidance layers.

Pixel (i, j) samples the image plane at (j + 0.5, i + 0.5). Attributes are
interpolated with perspective-correct barycentrics. Triangles with a vertex
behind the camera are culled whole; there is no near-plane clipping.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

from motionguide.body.body_model import PosedMesh
from motionguide.core.exceptions import DimensionError, InvalidArgumentError
from motionguide.render.camera import NEAR_Z, Camera, to_camera_space

BACKGROUND_DEPTH = 1e30


@dataclass
class GuidanceMaps:
    """Four aligned per-frame layers rendered from one posed body."""

    width: int
    height: int
    depth: np.ndarray  # H x W, camera z in metres, BACKGROUND_DEPTH outside
    normal: np.ndarray  # H x W x 3, camera-space unit normals, zero outside
    semantic: np.ndarray  # H x W, part label + 1, zero outside
    skeleton: np.ndarray  # H x W x 3 in [0, 1]

    @classmethod
    def blank(cls, width: int, height: int) -> "GuidanceMaps":
        return cls(
            width=width,
            height=height,
            depth=np.full((height, width), BACKGROUND_DEPTH),
            normal=np.zeros((height, width, 3)),
            semantic=np.zeros((height, width), dtype=np.int32),
            skeleton=np.zeros((height, width, 3)),
        )

    @property
    def foreground(self) -> np.ndarray:
        return self.depth < BACKGROUND_DEPTH

    def validate(self, num_parts: Optional[int] = None) -> None:
        shape = (self.height, self.width)
        if self.depth.shape != shape or self.semantic.shape != shape:
            raise DimensionError("depth/semantic layers do not match map size")
        if self.normal.shape != shape + (3,) or self.skeleton.shape != shape + (3,):
            raise DimensionError("normal/skeleton layers do not match map size")
        if num_parts is not None and self.semantic.max(initial=0) > num_parts:
            raise InvalidArgumentError(
                f"semantic value {self.semantic.max()} exceeds part count {num_parts}"
            )


def _pixel_range(lo: float, hi: float, size: int):
    start = max(int(np.ceil(lo - 0.5)), 0)
    stop = min(int(np.floor(hi - 0.5)), size - 1)
    return start, stop


def rasterize_mesh(
    mesh: PosedMesh,
    camera: Camera,
    width: int,
    height: int,
    back_face_culling: bool = True,
) -> GuidanceMaps:
    """
    Renders depth, normal and semantic layers; the skeleton layer is blank.

    Args:
        mesh: Posed mesh with faces, per-vertex normals and part labels.
        camera: Pinhole camera.
        width: Image width in pixels.
        height: Image height in pixels.
        back_face_culling: Drop faces whose normal points away from the camera.

    Returns:
        GuidanceMaps of the requested size.
    """
    if width <= 0 or height <= 0:
        raise InvalidArgumentError(f"image size must be positive, got {width}x{height}")

    maps = GuidanceMaps.blank(width, height)
    faces = np.asarray(mesh.faces, dtype=np.int64).reshape(-1, 3)
    if len(mesh.vertices) == 0 or len(faces) == 0:
        return maps

    p_cam = to_camera_space(camera, mesh.vertices)
    n_cam = np.asarray(mesh.per_vertex_normals, dtype=np.float64) @ camera.R.T
    z = p_cam[:, 2]
    in_front = z > NEAR_Z
    safe_z = np.where(in_front, z, 1.0)
    u = camera.focal * p_cam[:, 0] / safe_z + camera.cx
    v = camera.focal * p_cam[:, 1] / safe_z + camera.cy
    labels = np.asarray(mesh.part_labels, dtype=np.int32)

    depth, normal, semantic = maps.depth, maps.normal, maps.semantic
    culled_behind = culled_back = drawn = 0
    for face in faces:
        if not in_front[face].all():
            culled_behind += 1
            continue
        p0, p1, p2 = p_cam[face]
        face_normal = np.cross(p1 - p0, p2 - p0)
        if back_face_culling and face_normal.dot(p0) >= 0:
            culled_back += 1
            continue

        fu, fv, fz = u[face], v[face], z[face]
        area = (fu[1] - fu[0]) * (fv[2] - fv[0]) - (fu[2] - fu[0]) * (fv[1] - fv[0])
        if area == 0:
            continue
        j0, j1 = _pixel_range(fu.min(), fu.max(), width)
        i0, i1 = _pixel_range(fv.min(), fv.max(), height)
        if j0 > j1 or i0 > i1:
            continue

        xs = np.arange(j0, j1 + 1) + 0.5
        ys = np.arange(i0, i1 + 1) + 0.5
        px, py = np.meshgrid(xs, ys)
        l0 = ((fu[2] - fu[1]) * (py - fv[1]) - (fv[2] - fv[1]) * (px - fu[1])) / area
        l1 = ((fu[0] - fu[2]) * (py - fv[2]) - (fv[0] - fv[2]) * (px - fu[2])) / area
        l2 = ((fu[1] - fu[0]) * (py - fv[0]) - (fv[1] - fv[0]) * (px - fu[0])) / area
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not inside.any():
            continue

        q = np.stack([l0 / fz[0], l1 / fz[1], l2 / fz[2]], axis=-1)
        inv_z = q.sum(axis=-1)
        pixel_z = 1.0 / np.where(inside, inv_z, 1.0)
        region = depth[i0 : i1 + 1, j0 : j1 + 1]
        win = inside & (pixel_z < region)
        if not win.any():
            continue

        bary = q[win] / inv_z[win][:, None]
        interp = bary @ n_cam[face]
        lengths = np.linalg.norm(interp, axis=1, keepdims=True)
        fallback = face_normal / np.linalg.norm(face_normal)
        interp = np.where(lengths > 0, interp / np.where(lengths > 0, lengths, 1.0), fallback)

        rows, cols = np.nonzero(win)
        rows += i0
        cols += j0
        depth[rows, cols] = pixel_z[win]
        normal[rows, cols] = interp
        semantic[rows, cols] = labels[face[np.argmax(bary, axis=1)]] + 1
        drawn += 1

    logger.debug(
        f"Rasterized {len(faces)} faces: drawn={drawn} "
        f"culled_behind={culled_behind} culled_back={culled_back}"
    )
    return maps
