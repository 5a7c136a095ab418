"""
motionguide/render/camera.py
Pinhole camera with a scalar scale knob on the focal length.
"""

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from motionguide.core.exceptions import DimensionError, InvalidArgumentError

NEAR_Z = 1e-9
ORTHONORMAL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Camera:
    """World-to-camera rigid transform plus pinhole intrinsics."""

    f: float
    cx: float
    cy: float
    scale: float = 1.0
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=np.float64).reshape(3, 3)
        t = np.array(self.t, dtype=np.float64).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        for name in ("f", "cx", "cy", "scale"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def focal(self) -> float:
        return self.f * self.scale

    def problems(self) -> Tuple[str, ...]:
        """Violated camera invariants, empty when the camera is valid."""
        issues = []
        values = np.concatenate([[self.f, self.cx, self.cy, self.scale], self.R.ravel(), self.t])
        if not np.all(np.isfinite(values)):
            issues.append("non-finite parameter")
        elif self.focal <= 0:
            issues.append(f"f*scale = {self.focal} is not positive")
        elif np.abs(self.R @ self.R.T - np.eye(3)).max() > ORTHONORMAL_TOLERANCE:
            issues.append("R is not orthonormal")
        return tuple(issues)

    def validate(self) -> None:
        issues = self.problems()
        if issues:
            raise InvalidArgumentError(f"invalid camera: {', '.join(issues)}")

    def scaled(self, factor: float) -> "Camera":
        return replace(self, scale=self.scale * factor)

    def to_dict(self) -> dict:
        return {
            "f": self.f,
            "cx": self.cx,
            "cy": self.cy,
            "scale": self.scale,
            "R": self.R.ravel().tolist(),
            "t": self.t.tolist(),
        }

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Camera)
            and (self.f, self.cx, self.cy, self.scale) == (other.f, other.cx, other.cy, other.scale)
            and np.array_equal(self.R, other.R)
            and np.array_equal(self.t, other.t)
        )

    def __hash__(self):
        return hash((self.f, self.cx, self.cy, self.scale, self.R.tobytes(), self.t.tobytes()))


def project_points(camera: Camera, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Projects N x 3 world points.

    Returns:
        (u, v, z_cam, visible); points with z_cam <= NEAR_Z are flagged not
        visible and their u, v are NaN.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DimensionError(f"points must be N x 3, got {points.shape}")
    p_cam = points @ camera.R.T + camera.t
    z = p_cam[:, 2]
    visible = z > NEAR_Z
    safe_z = np.where(visible, z, 1.0)
    u = np.where(visible, camera.focal * p_cam[:, 0] / safe_z + camera.cx, np.nan)
    v = np.where(visible, camera.focal * p_cam[:, 1] / safe_z + camera.cy, np.nan)
    return u, v, z, visible


def project(camera: Camera, point) -> Tuple[float, float, float, bool]:
    """
    Projects a single world point.

    Returns:
        (u, v, z_cam, visible). A point behind the camera is culled by
        returning visible=False rather than raising.
    """
    u, v, z, visible = project_points(camera, np.asarray(point, dtype=np.float64).reshape(1, 3))
    return float(u[0]), float(v[0]), float(z[0]), bool(visible[0])


def to_camera_space(camera: Camera, points: np.ndarray) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) @ camera.R.T + camera.t


def look_at_camera(
    distance: float, width: int, height: int, f: float, height_offset: float = 0.0
) -> Camera:
    """
    Camera on the +z axis looking back at the origin with image y pointing down.

    Used for fixtures and the default motion generator.
    """
    return Camera(
        f=f,
        cx=width / 2.0,
        cy=height / 2.0,
        scale=1.0,
        R=np.diag([1.0, -1.0, -1.0]),
        t=np.array([0.0, height_offset, distance]),
    )
