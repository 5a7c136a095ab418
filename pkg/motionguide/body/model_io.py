"""
motionguide/body/model_io.py
Reader and writer for the CHMPBODY binary body-model layout.

Layout (little-endian): magic "CHMPBODY", u32 version, u32 V, K, S, P, L, F,
then f64 vertices (V*3), shape_dirs (V*3*S), pose_dirs (V*3*P, omitted when
P == 0), skin_weights (V*K), joint_regressor (K*V), i32 parents (K),
u32 part_labels (V), u32 faces (F*3).
"""

import struct
from pathlib import Path
from typing import List, Union

import numpy as np
from loguru import logger

from motionguide.body.body_model import BodyModel
from motionguide.core.exceptions import ModelFormatError, StorageError

MAGIC = b"CHMPBODY"
VERSION = 1
_HEADER = struct.Struct("<8s7I")


class _Reader:
    def __init__(self, payload: bytes, path: Path):
        self.payload = payload
        self.offset = 0
        self.path = path

    def take(self, dtype: str, count: int, what: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        end = self.offset + itemsize * count
        if end > len(self.payload):
            raise ModelFormatError(
                f"{self.path}: truncated while reading {what} "
                f"(need {end} bytes, have {len(self.payload)})"
            )
        out = np.frombuffer(self.payload, dtype=dtype, count=count, offset=self.offset)
        self.offset = end
        return out


def topological_order(parents: np.ndarray) -> List[int]:
    """Breadth-first joint order from the root; rejects forests and cycles."""
    parents = np.asarray(parents)
    roots = np.flatnonzero(parents == -1)
    if roots.size != 1:
        raise ModelFormatError(f"kinematic tree must have exactly one root, found {roots.size}")
    order = [int(roots[0])]
    cursor = 0
    while cursor < len(order):
        node = order[cursor]
        order.extend(int(c) for c in np.flatnonzero(parents == node))
        cursor += 1
    if len(order) != len(parents):
        raise ModelFormatError("kinematic tree contains a cycle or an unreachable joint")
    return order


def _is_sorted(parents: np.ndarray) -> bool:
    return parents[0] == -1 and all(0 <= parents[i] < i for i in range(1, len(parents)))


def _resort(parents, skin_weights, joint_regressor, pose_dirs):
    if len(parents) == 0 or _is_sorted(parents):
        return parents, skin_weights, joint_regressor, pose_dirs
    if np.any((parents < -1) | (parents >= len(parents))):
        raise ModelFormatError("parent index out of range")
    order = topological_order(parents)
    logger.warning("Kinematic tree is not topologically sorted; remapping joints")
    new_index = {old: new for new, old in enumerate(order)}
    new_parents = np.array(
        [-1 if parents[old] == -1 else new_index[int(parents[old])] for old in order],
        dtype=np.int64,
    )
    if pose_dirs is not None:
        if order[0] != 0:
            raise ModelFormatError(
                "pose_dirs cannot be remapped when the root is not stored first"
            )
        # nine features per non-root joint, in stored joint order
        pose_dirs = np.concatenate(
            [pose_dirs[:, :, 9 * (old - 1) : 9 * old] for old in order[1:]], axis=2
        )
    return new_parents, skin_weights[:, order], joint_regressor[order], pose_dirs


def load_body_model(path: Union[str, Path]) -> BodyModel:
    """
    Loads and validates a CHMPBODY file.

    Raises:
        StorageError: The file cannot be read.
        ModelFormatError: Bad header, truncated payload or a violated invariant.
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise StorageError(f"Cannot read body model {path}: {e}") from e

    if len(payload) < _HEADER.size:
        raise ModelFormatError(f"{path}: file too short for a CHMPBODY header")
    magic, version, V, K, S, P, L, F = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    if P not in (0, 9 * (K - 1)):
        raise ModelFormatError(f"{path}: P = {P} must be 0 or 9*(K-1) = {9 * (K - 1)}")

    reader = _Reader(payload, path)
    reader.offset = _HEADER.size
    vertices = reader.take("<f8", V * 3, "vertices").reshape(V, 3)
    shape_dirs = reader.take("<f8", V * 3 * S, "shape_dirs").reshape(V, 3, S)
    pose_dirs = reader.take("<f8", V * 3 * P, "pose_dirs").reshape(V, 3, P) if P else None
    skin_weights = reader.take("<f8", V * K, "skin_weights").reshape(V, K)
    joint_regressor = reader.take("<f8", K * V, "joint_regressor").reshape(K, V)
    parents = reader.take("<i4", K, "parents").astype(np.int64)
    part_labels = reader.take("<u4", V, "part_labels").astype(np.int64)
    faces = reader.take("<u4", F * 3, "faces").astype(np.int64).reshape(F, 3)
    if reader.offset != len(payload):
        raise ModelFormatError(
            f"{path}: {len(payload) - reader.offset} trailing bytes after faces"
        )

    parents, skin_weights, joint_regressor, pose_dirs = _resort(
        parents, skin_weights, joint_regressor, pose_dirs
    )
    try:
        model = BodyModel(
            template_vertices=vertices,
            shape_dirs=shape_dirs,
            skin_weights=skin_weights,
            joint_regressor=joint_regressor,
            parents=parents,
            part_labels=part_labels,
            faces=faces,
            num_parts=L,
            pose_dirs=pose_dirs,
        )
    except ModelFormatError as e:
        raise ModelFormatError(f"{path}: {e}") from e
    logger.info(f"Loaded body model {path}: V={V} K={K} S={S} P={P} L={L} F={F}")
    return model


def save_body_model(model: BodyModel, path: Union[str, Path]) -> Path:
    """Writes ``model`` in the CHMPBODY layout."""
    path = Path(path)
    V, K, S = model.num_vertices, model.num_joints, model.num_shape
    P = model.num_pose_features
    header = _HEADER.pack(MAGIC, VERSION, V, K, S, P, model.num_parts, len(model.faces))
    chunks = [
        header,
        model.template_vertices.astype("<f8").tobytes(),
        model.shape_dirs.astype("<f8").tobytes(),
    ]
    if P:
        chunks.append(model.pose_dirs.astype("<f8").tobytes())
    chunks += [
        model.skin_weights.astype("<f8").tobytes(),
        model.joint_regressor.astype("<f8").tobytes(),
        model.parents.astype("<i4").tobytes(),
        model.part_labels.astype("<u4").tobytes(),
        model.faces.astype("<u4").tobytes(),
    ]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(b"".join(chunks))
    except OSError as e:
        raise StorageError(f"Cannot write body model {path}: {e}") from e
    logger.info(f"Saved body model to {path}")
    return path
