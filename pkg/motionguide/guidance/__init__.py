from motionguide.guidance.attention_dump import attention_saliency, dump_attention
from motionguide.guidance.checkpoint import load_checkpoint, save_checkpoint
from motionguide.guidance.conditions import build_bundle, condition_images, resolve_conditions
from motionguide.guidance.encoder import (
    GuidanceEncoder,
    GuidanceNet,
    conv2d,
    encode_condition,
    fuse,
    self_attention,
)

__all__ = [
    "attention_saliency",
    "dump_attention",
    "load_checkpoint",
    "save_checkpoint",
    "build_bundle",
    "condition_images",
    "resolve_conditions",
    "GuidanceEncoder",
    "GuidanceNet",
    "conv2d",
    "encode_condition",
    "fuse",
    "self_attention",
]
