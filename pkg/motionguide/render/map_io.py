"""
motionguide/render/map_io.py
Guidance map exports: 8-bit PNGs, lossless CHMPMAPS f32 dumps and the
per-frame metadata sidecar.

Depth export: d_norm = (d_max - d) / (d_max - d_min) over foreground pixels,
background 0; a frame with a single foreground depth exports as 1. Normal
export: (n + 1) / 2 on foreground, background black. Semantic export: indexed
PNG whose palette has num_parts + 1 entries, index 0 black.
"""

import colorsys
import json
import struct
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from loguru import logger
from PIL import Image

from motionguide.core.exceptions import DimensionError, ModelFormatError, StorageError
from motionguide.render.rasterizer import BACKGROUND_DEPTH, GuidanceMaps

MAGIC = b"CHMPMAPS"
VERSION = 1
LAYERS = ("depth", "normal", "semantic", "skeleton")
# an indexed PNG palette holds 256 colours, background included
MAX_INDEXED_PARTS = 255


def semantic_palette(num_parts: int) -> np.ndarray:
    """(num_parts + 1) x 3 uint8 colours; index 0 is the background."""
    if num_parts > MAX_INDEXED_PARTS:
        raise DimensionError(f"{num_parts} parts do not fit an indexed palette of 256 colours")
    palette = np.zeros((num_parts + 1, 3), dtype=np.uint8)
    for label in range(1, num_parts + 1):
        hue = (label - 1) / max(num_parts, 1)
        palette[label] = np.round(np.array(colorsys.hsv_to_rgb(hue, 0.75, 0.95)) * 255.0)
    return palette


def _indexed_semantic(maps: GuidanceMaps) -> bytes:
    lo, hi = int(maps.semantic.min(initial=0)), int(maps.semantic.max(initial=0))
    if lo < 0 or hi > MAX_INDEXED_PARTS:
        raise DimensionError(f"semantic labels span [{lo}, {hi}], outside the 8-bit indexed range [0, {MAX_INDEXED_PARTS}]")
    return np.ascontiguousarray(maps.semantic, dtype=np.uint8).tobytes()


def depth_range(maps: GuidanceMaps):
    fg = maps.foreground
    if not fg.any():
        return None, None
    values = maps.depth[fg]
    return float(values.min()), float(values.max())


def normalized_depth(maps: GuidanceMaps) -> np.ndarray:
    """Per-frame normalized depth in [0, 1], near = 1, background = 0."""
    out = np.zeros(maps.depth.shape)
    d_min, d_max = depth_range(maps)
    if d_min is None:
        return out
    fg = maps.foreground
    if d_max > d_min:
        out[fg] = (d_max - maps.depth[fg]) / (d_max - d_min)
    else:
        out[fg] = 1.0
    return out


def encoded_normal(maps: GuidanceMaps) -> np.ndarray:
    out = np.zeros(maps.normal.shape)
    fg = maps.foreground
    out[fg] = (maps.normal[fg] + 1.0) / 2.0
    return out


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_array(path: Union[str, Path], array: np.ndarray) -> Path:
    """Writes a CHMPMAPS f32 dump."""
    path = Path(path)
    array = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + struct.pack(f"<2I{array.ndim}I", VERSION, array.ndim, *array.shape)
    try:
        path.write_bytes(header + array.tobytes())
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}") from e
    return path


def read_array(path: Union[str, Path]) -> np.ndarray:
    """Reads a CHMPMAPS f32 dump."""
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}") from e
    if payload[:8] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {payload[:8]!r}")
    version, ndim = struct.unpack_from("<2I", payload, 8)
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    shape = struct.unpack_from(f"<{ndim}I", payload, 16)
    offset = 16 + 4 * ndim
    count = int(np.prod(shape)) if ndim else 1
    if len(payload) != offset + 4 * count:
        raise ModelFormatError(f"{path}: payload size does not match dims {shape}")
    return np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape)


def frame_stem(frame_index: int) -> str:
    return f"frame_{frame_index:05d}"


def export_maps(
    maps: GuidanceMaps, out_dir: Union[str, Path], frame_index: int, num_parts: int
) -> Dict[str, Path]:
    """
    Writes the PNG exports, f32 dumps and metadata sidecar of one frame.

    Returns:
        Mapping from artefact name to written path.
    """
    out_dir = Path(out_dir)
    stem = frame_stem(frame_index)
    written: Dict[str, Path] = {}
    palette = semantic_palette(num_parts)
    indexed = _indexed_semantic(maps)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        Image.fromarray(_to_uint8(normalized_depth(maps))).save(out_dir / f"{stem}_depth.png")
        Image.fromarray(_to_uint8(encoded_normal(maps))).save(out_dir / f"{stem}_normal.png")
        Image.fromarray(_to_uint8(maps.skeleton)).save(out_dir / f"{stem}_skeleton.png")
        semantic = Image.frombytes("P", (maps.width, maps.height), indexed)
        semantic.putpalette(palette.ravel().tolist())
        semantic.save(out_dir / f"{stem}_semantic.png")
    except OSError as e:
        raise StorageError(f"Cannot write map images for {stem} in {out_dir}: {e}") from e
    for layer in LAYERS:
        written[f"{layer}_png"] = out_dir / f"{stem}_{layer}.png"
        written[layer] = write_array(out_dir / f"{stem}_{layer}.chmp", getattr(maps, layer))

    d_min, d_max = depth_range(maps)
    meta = {
        "frame": frame_index,
        "width": maps.width,
        "height": maps.height,
        "num_parts": num_parts,
        "depth_min": d_min,
        "depth_max": d_max,
        "background_depth": BACKGROUND_DEPTH,
        "depth_export": "(depth_max - d) / (depth_max - depth_min), background 0",
        "normal_export": "(n + 1) / 2, background 0",
    }
    meta_path = out_dir / f"{stem}_meta.json"
    try:
        meta_path.write_text(json.dumps(meta, indent=2), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"Cannot write {meta_path}: {e}") from e
    written["meta"] = meta_path
    logger.debug(f"Exported guidance maps for {stem} to {out_dir}")
    return written


def load_maps(maps_dir: Union[str, Path], frame_index: int) -> GuidanceMaps:
    """Rebuilds GuidanceMaps of one frame from its f32 dumps."""
    maps_dir = Path(maps_dir)
    stem = frame_stem(frame_index)
    layers = {layer: read_array(maps_dir / f"{stem}_{layer}.chmp") for layer in LAYERS}
    depth = layers["depth"].astype(np.float64)
    # f32 rounds the sentinel; restore it exactly
    depth[depth >= np.float32(BACKGROUND_DEPTH)] = BACKGROUND_DEPTH
    height, width = depth.shape
    return GuidanceMaps(
        width=width,
        height=height,
        depth=depth,
        normal=layers["normal"].astype(np.float64),
        semantic=layers["semantic"].astype(np.int32),
        skeleton=layers["skeleton"].astype(np.float64),
    )


def maps_present(maps_dir: Union[str, Path], frame_index: int) -> bool:
    stem = frame_stem(frame_index)
    return all((Path(maps_dir) / f"{stem}_{layer}.chmp").exists() for layer in LAYERS)


def read_meta(maps_dir: Union[str, Path], frame_index: int) -> Dict:
    """Parses the metadata sidecar of one frame."""
    path = Path(maps_dir) / f"{frame_stem(frame_index)}_meta.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise StorageError(f"Missing map metadata {path}") from e
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: invalid JSON: {e}") from e
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}") from e


def rendered_frames(maps_dir: Union[str, Path]) -> List[int]:
    """Sorted frame indices that have a metadata sidecar in ``maps_dir``."""
    indices = []
    for path in Path(maps_dir).glob("frame_*_meta.json"):
        try:
            indices.append(int(path.name.split("_")[1]))
        except (IndexError, ValueError):
            continue
    return sorted(indices)
