"""
motionguide/alignment/motion_io.py
Motion sequence and reference-shape JSON documents.

Motion schema:
    {"fps": 30.0,
     "shape": [S reals],
     "source_shape": [S reals],            # optional, provenance
     "frames": [{"theta": [[x, y, z], ...K],
                 "camera": {"f", "cx", "cy", "scale", "R": [9], "t": [3]}}]}

Unknown fields are logged as warnings; missing fields are errors naming the
file and the field path.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np
from loguru import logger

from motionguide.alignment.shape_alignment import (
    AlignedSequence,
    MotionFrame,
    MotionSequence,
)
from motionguide.body.body_model import PoseParams, ShapeParams
from motionguide.core.exceptions import (
    MissingInputError,
    ModelFormatError,
    StorageError,
    ValidationError,
)
from motionguide.render.camera import Camera

TOP_LEVEL_FIELDS = {"fps", "shape", "source_shape", "frames"}
FRAME_FIELDS = {"theta", "camera"}
CAMERA_FIELDS = {"f", "cx", "cy", "scale", "R", "t"}


def _read_json(path: Path, what: str) -> Any:
    if not path.exists():
        raise MissingInputError(f"{what} file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: invalid JSON: {e}") from e
    except OSError as e:
        raise StorageError(f"Cannot read {what} file {path}: {e}") from e


def _require(doc: Dict[str, Any], key: str, path: Path, where: str) -> Any:
    if key not in doc:
        raise ModelFormatError(f"{path}: missing field '{where}{key}'")
    return doc[key]


def _warn_unknown(doc: Dict[str, Any], known: Iterable[str], path: Path, where: str) -> None:
    for key in sorted(set(doc) - set(known)):
        logger.warning(f"{path}: ignoring unknown field '{where}{key}'")


def _floats(value: Any, count: int, path: Path, field: str) -> np.ndarray:
    try:
        array = np.asarray(value, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: field '{field}' is not numeric") from e
    if count is not None and array.shape[0] != count:
        raise ModelFormatError(
            f"{path}: field '{field}' has {array.shape[0]} values, expected {count}"
        )
    return array


def _parse_camera(doc: Any, path: Path, where: str) -> Camera:
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: field '{where}' must be an object")
    _warn_unknown(doc, CAMERA_FIELDS, path, where + ".")
    values = {key: _require(doc, key, path, where + ".") for key in CAMERA_FIELDS}
    return Camera(
        f=float(values["f"]),
        cx=float(values["cx"]),
        cy=float(values["cy"]),
        scale=float(values["scale"]),
        R=_floats(values["R"], 9, path, where + ".R").reshape(3, 3),
        t=_floats(values["t"], 3, path, where + ".t"),
    )


def _parse_frames(frames: Any, path: Path) -> List[MotionFrame]:
    if not isinstance(frames, list):
        raise ModelFormatError(f"{path}: field 'frames' must be a list")
    parsed = []
    for i, frame in enumerate(frames):
        where = f"frames[{i}]"
        if not isinstance(frame, dict):
            raise ModelFormatError(f"{path}: field '{where}' must be an object")
        _warn_unknown(frame, FRAME_FIELDS, path, where + ".")
        theta = _floats(_require(frame, "theta", path, where + "."), None, path, where + ".theta")
        if theta.shape[0] % 3:
            raise ModelFormatError(f"{path}: field '{where}.theta' is not K x 3")
        camera = _parse_camera(_require(frame, "camera", path, where + "."), path, where + ".camera")
        try:
            parsed.append(MotionFrame(pose=PoseParams(theta.reshape(-1, 3)), camera=camera))
        except ValidationError as e:
            raise ModelFormatError(f"{path}: {where}: {e}") from e
    return parsed


def _parse_motion(doc: Any, path: Path) -> MotionSequence:
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    _warn_unknown(doc, TOP_LEVEL_FIELDS, path, "")
    fps = float(_require(doc, "fps", path, ""))
    shape = _floats(_require(doc, "shape", path, ""), None, path, "shape")
    frames = _parse_frames(_require(doc, "frames", path, ""), path)
    if not frames:
        raise ModelFormatError(f"{path}: field 'frames' is empty")
    try:
        motion = MotionSequence(frames=frames, source_shape=ShapeParams(shape), fps=fps)
    except ValidationError as e:
        raise ModelFormatError(f"{path}: {e}") from e
    logger.info(f"Loaded motion {path}: {len(frames)} frames at {fps} fps")
    return motion


def load_motion(path: Union[str, Path]) -> MotionSequence:
    """Parses a motion JSON document."""
    path = Path(path)
    return _parse_motion(_read_json(path, "motion"), path)


def load_reference_shape(path: Union[str, Path]) -> ShapeParams:
    """Parses ``{"beta": [...]}`` or a bare JSON list of shape coefficients."""
    path = Path(path)
    doc = _read_json(path, "reference shape")
    if isinstance(doc, dict):
        _warn_unknown(doc, {"beta"}, path, "")
        doc = _require(doc, "beta", path, "")
    try:
        return ShapeParams(_floats(doc, None, path, "beta"))
    except ValidationError as e:
        raise ModelFormatError(f"{path}: {e}") from e


def motion_to_dict(sequence: Union[MotionSequence, AlignedSequence]) -> Dict[str, Any]:
    if isinstance(sequence, AlignedSequence):
        shape, source = sequence.shape, sequence.source_shape
    else:
        shape, source = sequence.source_shape, None
    doc: Dict[str, Any] = {"fps": sequence.fps, "shape": shape.beta.tolist()}
    if source is not None:
        doc["source_shape"] = source.beta.tolist()
    doc["frames"] = [
        {"theta": frame.pose.theta.tolist(), "camera": frame.camera.to_dict()}
        for frame in sequence.frames
    ]
    return doc


def save_motion(sequence: Union[MotionSequence, AlignedSequence], path: Union[str, Path]) -> Path:
    """Writes a motion or aligned sequence in the motion JSON schema."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(motion_to_dict(sequence), f, indent=2)
    except OSError as e:
        raise StorageError(f"Cannot write motion file {path}: {e}") from e
    logger.info(f"Saved {len(sequence.frames)} frames to {path}")
    return path


def load_aligned(path: Union[str, Path]) -> AlignedSequence:
    """Reads an aligned motion file back as an AlignedSequence."""
    path = Path(path)
    doc = _read_json(path, "motion")
    motion = _parse_motion(doc, path)
    source = doc.get("source_shape")
    if source is not None:
        source = ShapeParams(_floats(source, len(motion.source_shape.beta), path, "source_shape"))
    return AlignedSequence(
        shape=motion.source_shape,
        frames=motion.frames,
        fps=motion.fps,
        source_shape=source,
    )
