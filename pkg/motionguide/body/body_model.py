"""
motionguide/body/body_model.py
Parametric body evaluation: shape blend, pose correctives, forward kinematics
and linear blend skinning.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from motionguide.core.exceptions import (
    DimensionError,
    InvalidArgumentError,
    ModelFormatError,
)

SMALL_ANGLE = 1e-8
PARTITION_TOLERANCE = 1e-9


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BodyModel:
    """
    Immutable body model: template mesh, blend shapes, skinning weights,
    joint regressor, kinematic tree and per-vertex part labels.

    Arrays are copied and made read-only at construction; ``validate`` is run
    so a BodyModel that exists always satisfies its invariants.
    """

    template_vertices: np.ndarray  # V x 3
    shape_dirs: np.ndarray  # V x 3 x S
    skin_weights: np.ndarray  # V x K
    joint_regressor: np.ndarray  # K x V
    parents: np.ndarray  # K, root = -1
    part_labels: np.ndarray  # V
    faces: np.ndarray  # F x 3
    num_parts: int
    pose_dirs: Optional[np.ndarray] = None  # V x 3 x 9(K-1)

    def __post_init__(self):
        object.__setattr__(self, "template_vertices", _frozen(self.template_vertices, np.float64).reshape(-1, 3))
        num_vertices = self.template_vertices.shape[0]
        object.__setattr__(self, "shape_dirs", _frozen(self.shape_dirs, np.float64).reshape(num_vertices, 3, -1))
        object.__setattr__(self, "skin_weights", _frozen(self.skin_weights, np.float64))
        object.__setattr__(self, "joint_regressor", _frozen(self.joint_regressor, np.float64))
        object.__setattr__(self, "parents", _frozen(self.parents, np.int64).reshape(-1))
        object.__setattr__(self, "part_labels", _frozen(self.part_labels, np.int64).reshape(-1))
        object.__setattr__(self, "faces", _frozen(self.faces, np.int64).reshape(-1, 3))
        if self.pose_dirs is not None:
            object.__setattr__(self, "pose_dirs", _frozen(self.pose_dirs, np.float64).reshape(num_vertices, 3, -1))
        self.validate()

    @property
    def num_vertices(self) -> int:
        return self.template_vertices.shape[0]

    @property
    def num_joints(self) -> int:
        return self.parents.shape[0]

    @property
    def num_shape(self) -> int:
        return self.shape_dirs.shape[2]

    @property
    def num_pose_features(self) -> int:
        return 0 if self.pose_dirs is None else self.pose_dirs.shape[2]

    @property
    def bones(self) -> Tuple[Tuple[int, int], ...]:
        """(parent, child) pairs of the kinematic tree."""
        return tuple((int(self.parents[i]), i) for i in range(1, self.num_joints))

    def validate(self) -> None:
        """Check every model invariant, raising on the first violation."""
        V, K = self.num_vertices, self.num_joints
        if self.skin_weights.shape != (V, K):
            raise ModelFormatError(
                f"skin_weights has shape {self.skin_weights.shape}, expected {(V, K)}"
            )
        if self.joint_regressor.shape != (K, V):
            raise ModelFormatError(
                f"joint_regressor has shape {self.joint_regressor.shape}, expected {(K, V)}"
            )
        if self.part_labels.shape != (V,):
            raise ModelFormatError(
                f"part_labels has {self.part_labels.shape[0]} entries, expected {V}"
            )
        if K < 1:
            raise ModelFormatError("model needs at least one joint")
        if self.pose_dirs is not None and self.pose_dirs.shape[2] != 9 * (K - 1):
            raise ModelFormatError(
                f"pose_dirs has {self.pose_dirs.shape[2]} features, expected {9 * (K - 1)}"
            )
        for name in ("template_vertices", "shape_dirs", "skin_weights", "joint_regressor"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ModelFormatError(f"{name} contains non-finite values")
        if self.pose_dirs is not None and not np.all(np.isfinite(self.pose_dirs)):
            raise ModelFormatError("pose_dirs contains non-finite values")

        if np.any(self.skin_weights < 0):
            row = int(np.argwhere(self.skin_weights < 0)[0, 0])
            raise ModelFormatError(f"skin_weights row {row} has a negative entry")
        weight_sums = self.skin_weights.sum(axis=1)
        bad = np.flatnonzero(np.abs(weight_sums - 1.0) > PARTITION_TOLERANCE)
        if bad.size:
            raise ModelFormatError(
                f"skin_weights row {int(bad[0])} sums to {weight_sums[bad[0]]!r}, expected 1"
            )
        regressor_sums = self.joint_regressor.sum(axis=1)
        bad = np.flatnonzero(np.abs(regressor_sums - 1.0) > PARTITION_TOLERANCE)
        if bad.size:
            raise ModelFormatError(
                f"joint_regressor row {int(bad[0])} sums to {regressor_sums[bad[0]]!r}, expected 1"
            )

        if self.parents[0] != -1:
            raise ModelFormatError(f"parents[0] must be -1, got {self.parents[0]}")
        for i in range(1, K):
            if not 0 <= self.parents[i] < i:
                raise ModelFormatError(
                    f"parents[{i}] = {self.parents[i]} violates 0 <= parent < index"
                )

        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= V):
            raise ModelFormatError(f"face index out of range [0, {V})")
        if self.part_labels.size and (
            self.part_labels.min() < 0 or self.part_labels.max() >= self.num_parts
        ):
            raise ModelFormatError(f"part label out of range [0, {self.num_parts})")


@dataclass(frozen=True)
class ShapeParams:
    """Shape coefficients (beta)."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise InvalidArgumentError("shape coefficients must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def zeros(cls, num_shape: int) -> "ShapeParams":
        return cls(np.zeros(num_shape))

    def __eq__(self, other) -> bool:
        return isinstance(other, ShapeParams) and np.array_equal(self.beta, other.beta)

    def __hash__(self):
        return hash(self.beta.tobytes())


@dataclass(frozen=True)
class PoseParams:
    """Per-joint axis-angle rotations; joint 0 is the global orientation."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(theta)):
            raise InvalidArgumentError("pose axis-angles must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, num_joints: int) -> "PoseParams":
        return cls(np.zeros((num_joints, 3)))

    def __eq__(self, other) -> bool:
        return isinstance(other, PoseParams) and np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash(self.theta.tobytes())


@dataclass
class PosedMesh:
    vertices: np.ndarray
    joints: np.ndarray
    per_vertex_normals: np.ndarray
    part_labels: np.ndarray
    faces: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))

    @classmethod
    def empty(cls) -> "PosedMesh":
        return cls(
            vertices=np.zeros((0, 3)),
            joints=np.zeros((0, 3)),
            per_vertex_normals=np.zeros((0, 3)),
            part_labels=np.zeros(0, dtype=np.int64),
        )


def _skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(axis_angle) -> np.ndarray:
    """
    Converts an axis-angle vector to a 3x3 rotation matrix.

    Below ``SMALL_ANGLE`` the second-order expansion I + K + K^2/2 is used,
    with K the skew matrix of the (unnormalized) vector.

    Args:
        axis_angle: 3 reals, rotation angle times unit axis.

    Returns:
        Orthonormal 3x3 matrix with determinant +1.
    """
    r = np.asarray(axis_angle, dtype=np.float64).reshape(-1)
    if r.shape != (3,):
        raise DimensionError(f"axis-angle must have 3 components, got {r.shape[0]}")
    if not np.all(np.isfinite(r)):
        raise InvalidArgumentError(f"axis-angle must be finite, got {r}")

    angle = float(np.linalg.norm(r))
    if angle < SMALL_ANGLE:
        k = _skew(r)
        return np.eye(3) + k + 0.5 * (k @ k)

    k = _skew(r / angle)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def batch_rodrigues(theta: np.ndarray) -> np.ndarray:
    """K x 3 axis-angles -> K x 3 x 3 rotations."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1, 3)
    if len(theta) == 0:
        return np.zeros((0, 3, 3))
    return np.stack([rodrigues(r) for r in theta])


def with_zeros(rotation: np.ndarray, translation: np.ndarray) -> np.ndarray:
    """Assemble a 4x4 rigid transform."""
    out = np.eye(4)
    out[:3, :3] = rotation
    out[:3, 3] = translation
    return out


def forward_kinematics(
    model: BodyModel, rest_joints: np.ndarray, local_rots: np.ndarray
) -> np.ndarray:
    """
    Composes world transforms root-to-leaf.

    transform[i] = transform[parent] @ translate(J_i - J_parent) @ rotate(R_i);
    the root uses J_0 as its translation.

    Args:
        model: Supplies the kinematic tree.
        rest_joints: K x 3 rest-pose joint positions.
        local_rots: K x 3 x 3 local rotations.

    Returns:
        K x 4 x 4 world transforms.
    """
    rest_joints = np.asarray(rest_joints, dtype=np.float64)
    local_rots = np.asarray(local_rots, dtype=np.float64)
    K = model.num_joints
    if rest_joints.shape != (K, 3):
        raise DimensionError(f"rest_joints has shape {rest_joints.shape}, expected {(K, 3)}")
    if local_rots.shape != (K, 3, 3):
        raise DimensionError(f"local_rots has shape {local_rots.shape}, expected {(K, 3, 3)}")

    transforms = np.empty((K, 4, 4))
    transforms[0] = with_zeros(local_rots[0], rest_joints[0])
    for i in range(1, K):
        parent = model.parents[i]
        local = with_zeros(local_rots[i], rest_joints[i] - rest_joints[parent])
        transforms[i] = transforms[parent] @ local
    return transforms


def regress_joints(model: BodyModel, vertices: np.ndarray) -> np.ndarray:
    """joints = joint_regressor @ vertices."""
    vertices = np.asarray(vertices, dtype=np.float64)
    if vertices.shape != (model.num_vertices, 3):
        raise DimensionError(
            f"vertices has shape {vertices.shape}, expected {(model.num_vertices, 3)}"
        )
    return model.joint_regressor @ vertices


def pose_feature(rotations: np.ndarray) -> np.ndarray:
    """vec(R_1..R_{K-1} - I); the root rotation is excluded."""
    return (rotations[1:] - np.eye(3)).reshape(-1)


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """
    Area-weighted vertex normals, accumulated in face order.

    Zero-area faces contribute nothing; vertices touched by no face (or only by
    degenerate faces) keep a zero normal.
    """
    normals = np.zeros_like(vertices)
    if len(faces) == 0:
        return normals
    v0, v1, v2 = (vertices[faces[:, i]] for i in range(3))
    face_normals = np.cross(v1 - v0, v2 - v0)  # length = 2 * area
    for corner in range(3):
        np.add.at(normals, faces[:, corner], face_normals)
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    np.divide(normals, lengths, out=normals, where=lengths > 0)
    return normals


def evaluate_body(model: BodyModel, shape: ShapeParams, pose: PoseParams) -> PosedMesh:
    """
    Evaluates the body in a given shape and pose.

    Order of operations: shaped template, rest joints from the shaped
    template, optional pose-corrective offsets, forward kinematics, linear
    blend skinning with the rest-pose transforms removed, then normals.
    """
    if shape.beta.shape[0] != model.num_shape:
        raise DimensionError(
            f"shape has {shape.beta.shape[0]} coefficients, model expects {model.num_shape}"
        )
    if pose.theta.shape[0] != model.num_joints:
        raise DimensionError(
            f"pose has {pose.theta.shape[0]} joints, model expects {model.num_joints}"
        )

    v_shaped = model.template_vertices + model.shape_dirs @ shape.beta
    rest_joints = model.joint_regressor @ v_shaped

    rotations = batch_rodrigues(pose.theta)
    v_posed = v_shaped
    if model.pose_dirs is not None:
        v_posed = v_shaped + model.pose_dirs @ pose_feature(rotations)

    transforms = forward_kinematics(model, rest_joints, rotations)
    # G_k composed with the inverse rest transform translate(-J_k)
    relative = transforms.copy()
    relative[:, :3, 3] -= np.einsum("kij,kj->ki", transforms[:, :3, :3], rest_joints)

    blended = np.einsum("vk,kij->vij", model.skin_weights, relative)
    vertices = np.einsum("vij,vj->vi", blended[:, :3, :3], v_posed) + blended[:, :3, 3]
    joints = transforms[:, :3, 3].copy()

    logger.debug(
        f"Evaluated body: {model.num_vertices} vertices, {model.num_joints} joints"
    )
    return PosedMesh(
        vertices=vertices,
        joints=joints,
        per_vertex_normals=vertex_normals(vertices, model.faces),
        part_labels=np.array(model.part_labels),
        faces=np.array(model.faces),
    )
