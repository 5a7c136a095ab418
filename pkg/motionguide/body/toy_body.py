"""
motionguide/body/toy_body.py
Procedural low-poly humanoid used in place of licensed body-model assets.

Joints are the first K entries of a 24-joint humanoid layout (y up, metres);
each bone is a closed tube whose rings are centred on the bone axis. The
generated model satisfies every BodyModel invariant for any supported size.
"""

from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from motionguide.body.body_model import BodyModel
from motionguide.core.exceptions import InvalidArgumentError
from motionguide.core.rng import make_rng

HUMANOID_PARENTS = (
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
)

HUMANOID_JOINTS = np.array(
    [
        [0.00, 0.00, 0.00],  # pelvis
        [0.06, -0.09, 0.00],  # left hip
        [-0.06, -0.09, 0.00],  # right hip
        [0.00, 0.11, 0.00],  # spine 1
        [0.10, -0.47, 0.00],  # left knee
        [-0.10, -0.47, 0.00],  # right knee
        [0.00, 0.24, 0.00],  # spine 2
        [0.09, -0.87, 0.00],  # left ankle
        [-0.09, -0.87, 0.00],  # right ankle
        [0.00, 0.29, 0.00],  # spine 3
        [0.11, -0.93, 0.12],  # left foot
        [-0.11, -0.93, 0.12],  # right foot
        [0.00, 0.50, 0.00],  # neck
        [0.08, 0.41, 0.00],  # left collar
        [-0.08, 0.41, 0.00],  # right collar
        [0.00, 0.65, 0.05],  # head
        [0.18, 0.44, 0.00],  # left shoulder
        [-0.18, 0.44, 0.00],  # right shoulder
        [0.43, 0.43, 0.00],  # left elbow
        [-0.43, 0.43, 0.00],  # right elbow
        [0.68, 0.44, 0.00],  # left wrist
        [-0.68, 0.44, 0.00],  # right wrist
        [0.77, 0.44, 0.00],  # left hand
        [-0.77, 0.44, 0.00],  # right hand
    ]
)

MIN_VERTICES_PER_TUBE = 6
TUBE_RADIUS = 0.05


def _axis_frame(direction: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = direction / np.linalg.norm(direction)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    u = helper - helper.dot(d) * d
    u /= np.linalg.norm(u)
    w = np.cross(d, u)
    return u, w, d


def _split(total: int, parts: int) -> List[int]:
    base, extra = divmod(total, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


def _zip_rings(a: List[int], b: List[int]) -> List[Tuple[int, int, int]]:
    """Outward-wound strip between two rings of possibly different sizes."""
    faces = []
    na, nb = len(a), len(b)
    i = j = 0
    while i < na or j < nb:
        if j == nb or (i < na and (i + 1) * nb <= (j + 1) * na):
            faces.append((a[i], a[(i + 1) % na], b[j % nb]))
            i += 1
        else:
            faces.append((a[i % na], b[(j + 1) % nb], b[j]))
            j += 1
    return faces


def make_toy_body(
    num_vertices: int = 100,
    num_joints: int = 5,
    num_shape: int = 10,
    num_parts: Optional[int] = None,
    pose_correctives: bool = False,
    seed: int = 0,
) -> BodyModel:
    """
    Builds a procedural humanoid body model.

    Args:
        num_vertices: Total vertex count V.
        num_joints: Joint count K, at most 24.
        num_shape: Shape coefficient count S.
        num_parts: Part label count L; defaults to max(1, K - 1).
        pose_correctives: Include random small pose-corrective blend shapes.
        seed: Seed for the blend-shape bases.

    Returns:
        A validated BodyModel.
    """
    if not 1 <= num_joints <= len(HUMANOID_PARENTS):
        raise InvalidArgumentError(
            f"num_joints must be in [1, {len(HUMANOID_PARENTS)}], got {num_joints}"
        )
    if num_shape < 1:
        raise InvalidArgumentError(f"num_shape must be positive, got {num_shape}")
    num_parts = max(1, num_joints - 1) if num_parts is None else num_parts
    if num_parts < 1:
        raise InvalidArgumentError(f"num_parts must be positive, got {num_parts}")

    joints = HUMANOID_JOINTS[:num_joints]
    parents = np.array(HUMANOID_PARENTS[:num_joints])
    if num_joints == 1:
        # a single upright tube centred on the root
        segments = [(0, 0, joints[0] - [0.0, 0.1, 0.0], joints[0] + [0.0, 0.1, 0.0])]
    else:
        segments = [
            (int(parents[c]), c, joints[parents[c]], joints[c]) for c in range(1, num_joints)
        ]

    if num_vertices < MIN_VERTICES_PER_TUBE * len(segments):
        raise InvalidArgumentError(
            f"num_vertices must be at least {MIN_VERTICES_PER_TUBE * len(segments)} "
            f"for {num_joints} joints, got {num_vertices}"
        )

    vertices = np.zeros((num_vertices, 3))
    centers = np.zeros((num_vertices, 3))
    weights = np.zeros((num_vertices, num_joints))
    labels = np.zeros(num_vertices, dtype=np.int64)
    faces: List[Tuple[int, int, int]] = []
    joint_members: List[List[int]] = [[] for _ in range(num_joints)]

    cursor = 0
    for (parent, child, start, end), count in zip(segments, _split(num_vertices, len(segments))):
        num_rings = max(2, count // MIN_VERTICES_PER_TUBE)
        u, w, _ = _axis_frame(end - start)
        rings: List[List[int]] = []
        for k, ring_size in enumerate(_split(count, num_rings)):
            s = k / (num_rings - 1)
            center = start + s * (end - start)
            angles = 2.0 * np.pi * np.arange(ring_size) / ring_size
            idx = list(range(cursor, cursor + ring_size))
            vertices[idx] = center + TUBE_RADIUS * (
                np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * w
            )
            centers[idx] = center
            if parent == child:
                weights[idx, parent] = 1.0
            else:
                weights[idx, parent] = 1.0 - 0.5 * s
                weights[idx, child] = 0.5 * s
            labels[idx] = (child - 1) % num_parts if child > 0 else 0
            rings.append(idx)
            cursor += ring_size

        if parent == child:
            joint_members[parent].extend(i for ring in rings for i in ring)
        else:
            joint_members[parent].extend(rings[0])
            joint_members[child].extend(rings[-1])

        first, last = rings[0], rings[-1]
        faces.extend((first[0], first[k + 1], first[k]) for k in range(1, len(first) - 1))
        for lower, upper in zip(rings[:-1], rings[1:]):
            faces.extend(_zip_rings(lower, upper))
        faces.extend((last[0], last[k], last[k + 1]) for k in range(1, len(last) - 1))

    weights /= weights.sum(axis=1, keepdims=True)

    regressor = np.zeros((num_joints, num_vertices))
    for j, members in enumerate(joint_members):
        regressor[j, members] = 1.0 / len(members)

    rng = make_rng(seed)
    shape_dirs = rng.normal(0.0, 0.01, size=(num_vertices, 3, num_shape))
    shape_dirs[:, :, 0] = 0.3 * (vertices - centers)  # girth
    if num_shape > 1:
        shape_dirs[:, :, 1] = 0.05 * (vertices - joints[0]) * [0.0, 1.0, 0.0]  # height
    pose_dirs = None
    if pose_correctives and num_joints > 1:
        pose_dirs = rng.normal(0.0, 1e-3, size=(num_vertices, 3, 9 * (num_joints - 1)))

    model = BodyModel(
        template_vertices=vertices,
        shape_dirs=shape_dirs,
        skin_weights=weights,
        joint_regressor=regressor,
        parents=parents,
        part_labels=labels,
        faces=np.array(faces, dtype=np.int64).reshape(-1, 3),
        num_parts=num_parts,
        pose_dirs=pose_dirs,
    )
    logger.info(
        f"Built toy body: V={num_vertices} K={num_joints} S={num_shape} "
        f"L={num_parts} F={len(faces)} correctives={pose_dirs is not None}"
    )
    return model
