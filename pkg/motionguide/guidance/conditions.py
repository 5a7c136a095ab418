"""
motionguide/guidance/conditions.py
Turns rendered GuidanceMaps into the 3-channel condition images the guidance
networks consume, and batches them into GuidanceBundles.
"""

from typing import Dict, Iterable, Mapping, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from motionguide.core.enums import GuidanceCondition
from motionguide.core.exceptions import DimensionError, InvalidArgumentError
from motionguide.render.map_io import encoded_normal, normalized_depth, semantic_palette
from motionguide.render.rasterizer import GuidanceMaps

CONDITION_NAMES = tuple(GuidanceCondition.names())

PRESETS: Dict[str, Tuple[str, ...]] = {
    "full": CONDITION_NAMES,
    "skeleton_only": ("skeleton",),
    "no_geometry": ("semantic", "skeleton"),
    "no_skeleton": ("depth", "normal", "semantic"),
}


def resolve_conditions(selection: Union[str, Iterable[str]]) -> Tuple[str, ...]:
    """
    Expands a preset name, a comma-separated string or a list of condition
    names into a canonical-order tuple.

    Raises:
        InvalidArgumentError: Unknown name or empty selection.
    """
    if isinstance(selection, str):
        if selection in PRESETS:
            return PRESETS[selection]
        names = [part.strip() for part in selection.split(",") if part.strip()]
    else:
        names = list(selection)
        if len(names) == 1 and names[0] in PRESETS:
            return PRESETS[names[0]]
    unknown = [name for name in names if name not in CONDITION_NAMES]
    if unknown:
        raise InvalidArgumentError(
            f"unknown guidance condition(s) {unknown}; valid names are "
            f"{list(CONDITION_NAMES)} or presets {sorted(PRESETS)}"
        )
    if not names:
        raise InvalidArgumentError("at least one guidance condition is required")
    return tuple(name for name in CONDITION_NAMES if name in names)


def condition_images(maps: GuidanceMaps, num_parts: int) -> Dict[str, np.ndarray]:
    """
    The four layers as 3 x H x W float images in [0, 1].

    Depth is the per-frame normalized depth repeated on three channels; the
    semantic layer is decoded through the export palette.
    """
    depth = np.repeat(normalized_depth(maps)[None], 3, axis=0)
    normal = encoded_normal(maps).transpose(2, 0, 1)
    palette = semantic_palette(num_parts).astype(np.float64) / 255.0
    labels = np.clip(maps.semantic, 0, num_parts)
    semantic = palette[labels].transpose(2, 0, 1)
    skeleton = maps.skeleton.transpose(2, 0, 1)
    return {
        "depth": np.ascontiguousarray(depth),
        "normal": np.ascontiguousarray(normal),
        "semantic": np.ascontiguousarray(semantic),
        "skeleton": np.ascontiguousarray(skeleton),
    }


def downsample(images: torch.Tensor, size: int) -> torch.Tensor:
    """Box (area) downsampling of B x C x H x W to B x C x size x size."""
    if images.shape[-1] == size and images.shape[-2] == size:
        return images
    return F.adaptive_avg_pool2d(images, (size, size))


def build_bundle(
    frames: Sequence[GuidanceMaps],
    num_parts: int,
    conditions: Sequence[str] = CONDITION_NAMES,
    size: int = None,
) -> Dict[str, torch.Tensor]:
    """
    Stacks per-frame condition images into a bundle of B x 3 x H x W tensors.

    Args:
        frames: Rendered maps, one per batch item, all the same size.
        num_parts: Part count used for the semantic palette.
        conditions: Condition names to include.
        size: When given, every condition is area-downsampled to size x size.
    """
    if not frames:
        raise InvalidArgumentError("cannot build a guidance bundle from zero frames")
    sizes = {(m.height, m.width) for m in frames}
    if len(sizes) > 1:
        raise DimensionError(f"guidance maps disagree on size: {sorted(sizes)}")
    per_frame = [condition_images(m, num_parts) for m in frames]
    bundle = {}
    for name in resolve_conditions(conditions):
        stacked = torch.from_numpy(np.stack([images[name] for images in per_frame]))
        bundle[name] = downsample(stacked, size) if size is not None else stacked
    return bundle


def validate_bundle(bundle: Mapping[str, torch.Tensor]) -> Tuple[int, int]:
    """Checks the bundle invariants and returns the shared (H, W)."""
    if not bundle:
        raise InvalidArgumentError("guidance bundle needs at least one condition")
    resolve_conditions(list(bundle))
    sizes = {tuple(t.shape[-2:]) for t in bundle.values()}
    if len(sizes) > 1:
        raise DimensionError(f"guidance conditions disagree on spatial size: {sorted(sizes)}")
    return sizes.pop()


def select_items(bundle: Mapping[str, torch.Tensor], index) -> Dict[str, torch.Tensor]:
    """Batch-indexes every condition of a bundle."""
    return {name: tensor[index] for name, tensor in bundle.items()}
