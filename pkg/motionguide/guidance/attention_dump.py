"""
motionguide/guidance/attention_dump.py
Saliency images of the guidance self-attention.

Saliency of a token is the column sum of the attention matrix (how much every
query attends to it), reshaped to the feature grid and min-max normalized. A
map whose range is below SALIENCY_EPS is treated as constant and exports as
mid-gray 128.
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
from loguru import logger
from PIL import Image

from motionguide.core.exceptions import DimensionError, InvalidArgumentError, StorageError
from motionguide.guidance.encoder import GuidanceNet

SALIENCY_EPS = 1e-9
CONSTANT_GRAY = 128


def attention_saliency(attention: torch.Tensor, height: int, width: int) -> np.ndarray:
    """
    Normalized saliency in [0, 1] of one item's HW x HW attention matrix.

    A constant map is returned as 0.5 everywhere.
    """
    attention = attention.detach()
    if attention.dim() == 3:
        attention = attention[0]
    tokens = height * width
    if attention.shape != (tokens, tokens):
        raise DimensionError(
            f"attention of shape {tuple(attention.shape)} does not match a {height}x{width} grid"
        )
    saliency = attention.sum(dim=0).reshape(height, width).cpu().numpy()
    lo, hi = float(saliency.min()), float(saliency.max())
    if hi - lo < SALIENCY_EPS:
        return np.full((height, width), 0.5)
    return (saliency - lo) / (hi - lo)


def saliency_image(saliency: np.ndarray) -> np.ndarray:
    """8-bit grayscale rendering of a normalized saliency map."""
    if float(saliency.max() - saliency.min()) < SALIENCY_EPS:
        return np.full(saliency.shape, CONSTANT_GRAY, dtype=np.uint8)
    return np.round(np.clip(saliency, 0.0, 1.0) * 255.0).astype(np.uint8)


def net_saliency(net: GuidanceNet, condition: Optional[torch.Tensor] = None) -> np.ndarray:
    """
    Saliency of the first batch item of the last (or given) condition.

    Runs ``net`` on ``condition`` when one is given, otherwise reuses the
    attention stored by the previous forward pass.
    """
    if net.attention is None:
        raise InvalidArgumentError("guidance network was built without self-attention")
    if condition is not None:
        with torch.no_grad():
            net(condition)
    if net.last_attention is None or net.last_feature_size is None:
        raise InvalidArgumentError("guidance network has not encoded a condition yet")
    height, width = net.last_feature_size
    return attention_saliency(net.last_attention[0], height, width)


def dump_attention(
    net: GuidanceNet, condition: Optional[torch.Tensor], path: Union[str, Path]
) -> np.ndarray:
    """
    Writes the attention saliency of ``net`` as an 8-bit grayscale PNG.

    Returns:
        The exported uint8 image.
    """
    image = saliency_image(net_saliency(net, condition))
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(image).save(path)
    except OSError as e:
        raise StorageError(f"Cannot write attention image {path}: {e}") from e
    logger.debug(f"Attention saliency written to {path}")
    return image
