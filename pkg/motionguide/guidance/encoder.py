"""
motionguide/guidance/encoder.py
Per-condition guidance networks (conv stack -> self-attention -> zero-initialized
1x1 output layer) and summation fusion across conditions.

All tensors are float64 and laid out (batch, channels, height, width).
"""

import math
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from loguru import logger

from motionguide.core.enums import GuidanceCondition
from motionguide.core.exceptions import DimensionError, InvalidArgumentError
from motionguide.utils.optimization import set_zero_parameters

DTYPE = torch.float64
# Full (H*W)^2 attention; past this many tokens the cost is logged.
ATTENTION_TOKEN_WARNING = 1024

CANONICAL_ORDER = tuple(GuidanceCondition.names())


def check_tensor4(x: torch.Tensor, name: str = "input") -> None:
    if x.dim() != 4:
        raise DimensionError(f"{name} must be (batch, channels, height, width), got {tuple(x.shape)}")
    if not torch.isfinite(x).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")


def conv2d(
    x: torch.Tensor,
    weight: torch.Tensor,
    bias: Optional[torch.Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    padding_mode: str = "zeros",
) -> torch.Tensor:
    """
    Cross-correlation with bias; output side floor((H + 2p - k) / s) + 1.

    ``padding_mode`` is "zeros" or "replicate".
    """
    check_tensor4(x)
    if weight.dim() != 4:
        raise DimensionError(f"weight must be C_out x C_in x k x k, got {tuple(weight.shape)}")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"input has {x.shape[1]} channels, layer expects {weight.shape[1]}"
        )
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"bias has shape {tuple(bias.shape)}, expected ({weight.shape[0]},)")
    k = weight.shape[2]
    if x.shape[2] + 2 * padding < k or x.shape[3] + 2 * padding < k:
        raise DimensionError(
            f"{k}x{k} kernel does not fit a {x.shape[2]}x{x.shape[3]} input with padding {padding}"
        )
    if padding_mode == "zeros":
        return F.conv2d(x, weight, bias, stride=stride, padding=padding)
    if padding_mode == "replicate":
        if padding:
            x = F.pad(x, (padding,) * 4, mode="replicate")
        return F.conv2d(x, weight, bias, stride=stride)
    raise InvalidArgumentError(f"unknown padding mode '{padding_mode}'")


def apply_conv(x: torch.Tensor, layer: nn.Conv2d) -> torch.Tensor:
    return conv2d(
        x,
        layer.weight,
        layer.bias,
        stride=layer.stride[0],
        padding=layer.padding[0],
        padding_mode=layer.padding_mode,
    )


def self_attention(
    features: torch.Tensor, w_q: torch.Tensor, w_k: torch.Tensor, w_v: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Single-head spatial self-attention with a residual connection.

    Tokens are spatial positions. q = W_q x, k = W_k x, v = W_v x,
    A = softmax(q k^T / sqrt(C)) row-wise, output = x + A v.

    Returns:
        (output shaped like ``features``, attention of shape B x HW x HW)
    """
    check_tensor4(features, "features")
    b, c, h, w = features.shape
    for name, proj in (("W_q", w_q), ("W_k", w_k), ("W_v", w_v)):
        if proj.shape != (c, c):
            raise DimensionError(f"{name} has shape {tuple(proj.shape)}, expected ({c}, {c})")
    tokens = features.reshape(b, c, h * w).transpose(1, 2)  # B x N x C
    q = tokens @ w_q.T
    k = tokens @ w_k.T
    v = tokens @ w_v.T
    attention = torch.softmax(q @ k.transpose(1, 2) / math.sqrt(c), dim=-1)
    out = tokens + attention @ v
    return out.transpose(1, 2).reshape(b, c, h, w), attention


class GuidanceSelfAttention(nn.Module):
    """Holds the W_q, W_k, W_v projections of one guidance network."""

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.to_q = nn.Linear(channels, channels, bias=False, dtype=DTYPE)
        self.to_k = nn.Linear(channels, channels, bias=False, dtype=DTYPE)
        self.to_v = nn.Linear(channels, channels, bias=False, dtype=DTYPE)

    def forward(self, features: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        tokens = features.shape[2] * features.shape[3]
        if tokens > ATTENTION_TOKEN_WARNING:
            logger.warning(
                f"Guidance attention over {tokens} tokens builds a {tokens}x{tokens} matrix per item"
            )
        return self_attention(features, self.to_q.weight, self.to_k.weight, self.to_v.weight)


class GuidanceNet(nn.Module):
    """
    Encoder for one guidance condition.

    conv -> SiLU -> ... -> conv -> SiLU -> self-attention -> zero 1x1 conv.
    The output layer starts at exactly zero, so a fresh network contributes
    nothing to the fused guidance.
    """

    def __init__(
        self,
        in_channels: int = 3,
        out_channels: int = 4,
        conv_channels: Sequence[int] = (16, 32),
        conv_strides: Sequence[int] = (1, 2),
        use_attention: bool = True,
        padding_mode: str = "replicate",
    ):
        super().__init__()
        if len(conv_channels) == 0 or len(conv_channels) != len(conv_strides):
            raise InvalidArgumentError(
                "conv_channels and conv_strides must be nonempty and of equal length"
            )
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.use_attention = use_attention
        layers = []
        previous = in_channels
        for channels, stride in zip(conv_channels, conv_strides):
            layers.append(
                nn.Conv2d(
                    previous,
                    channels,
                    kernel_size=3,
                    stride=stride,
                    padding=1,
                    padding_mode=padding_mode,
                    dtype=DTYPE,
                )
            )
            previous = channels
        self.convs = nn.ModuleList(layers)
        self.attention = GuidanceSelfAttention(previous) if use_attention else None
        self.out_layer = set_zero_parameters(nn.Conv2d(previous, out_channels, kernel_size=1, dtype=DTYPE))
        self.last_attention: Optional[torch.Tensor] = None
        self.last_feature_size: Optional[Tuple[int, int]] = None

    @property
    def downsample(self) -> int:
        factor = 1
        for layer in self.convs:
            factor *= layer.stride[0]
        return factor

    def features(self, condition: torch.Tensor) -> torch.Tensor:
        """Conv stack with SiLU after every layer."""
        x = condition
        for layer in self.convs:
            x = F.silu(apply_conv(x, layer))
        return x

    def forward(self, condition: torch.Tensor) -> torch.Tensor:
        check_tensor4(condition, "condition")
        if condition.shape[1] != self.in_channels:
            raise DimensionError(
                f"condition has {condition.shape[1]} channels, network expects {self.in_channels}"
            )
        x = self.features(condition)
        self.last_feature_size = (x.shape[2], x.shape[3])
        if self.attention is not None:
            x, attention = self.attention(x)
            self.last_attention = attention.detach()
        return apply_conv(x, self.out_layer)


def encode_condition(net: GuidanceNet, condition: torch.Tensor) -> torch.Tensor:
    """Runs one guidance network on one condition tensor."""
    return net(condition)


def _ordered(outputs: Mapping[str, torch.Tensor]) -> Iterable[Tuple[str, torch.Tensor]]:
    unknown = sorted(set(outputs) - set(CANONICAL_ORDER))
    if unknown:
        raise InvalidArgumentError(
            f"unknown guidance condition(s) {unknown}; valid names are {list(CANONICAL_ORDER)}"
        )
    return [(name, outputs[name]) for name in CANONICAL_ORDER if name in outputs]


def _named(outputs) -> Dict[str, torch.Tensor]:
    if isinstance(outputs, Mapping):
        return dict(outputs)
    named: Dict[str, torch.Tensor] = {}
    for item in outputs:
        if isinstance(item, torch.Tensor) or not isinstance(item, (tuple, list)) or len(item) != 2:
            raise InvalidArgumentError(
                "fuse takes a mapping or (condition name, tensor) pairs; bare tensors have no canonical order"
            )
        name, tensor = item
        if name in named:
            raise InvalidArgumentError(f"condition '{name}' given twice")
        named[name] = tensor
    return named


def fuse(outputs) -> torch.Tensor:
    """
    Sums encoded conditions in the canonical order depth, normal, semantic,
    skeleton, whatever order they arrive in.

    ``outputs`` is a mapping or a sequence of (name, tensor) pairs.
    """
    items = [t for _, t in _ordered(_named(outputs))]
    if not items:
        raise InvalidArgumentError("fuse needs at least one encoded condition")
    shape = items[0].shape
    for tensor in items[1:]:
        if tensor.shape != shape:
            raise DimensionError(
                f"cannot fuse tensors of shapes {tuple(shape)} and {tuple(tensor.shape)}"
            )
    y = items[0]
    for tensor in items[1:]:
        y = y + tensor
    return y


class GuidanceEncoder(nn.Module):
    """One GuidanceNet per enabled condition, fused by summation."""

    def __init__(
        self,
        conditions: Sequence[str] = CANONICAL_ORDER,
        out_channels: int = 4,
        conv_channels: Sequence[int] = (16, 32),
        conv_strides: Sequence[int] = (1, 2),
        use_attention: bool = True,
    ):
        super().__init__()
        ordered = [name for name in CANONICAL_ORDER if name in set(conditions)]
        if not ordered or len(ordered) != len(set(conditions)):
            raise InvalidArgumentError(
                f"conditions must be a nonempty subset of {list(CANONICAL_ORDER)}, got {list(conditions)}"
            )
        self.conditions = tuple(ordered)
        self.out_channels = out_channels
        self.nets = nn.ModuleDict(
            {
                name: GuidanceNet(
                    in_channels=3,
                    out_channels=out_channels,
                    conv_channels=conv_channels,
                    conv_strides=conv_strides,
                    use_attention=use_attention,
                )
                for name in self.conditions
            }
        )

    @property
    def downsample(self) -> int:
        return self.nets[self.conditions[0]].downsample

    def encode(self, bundle: Mapping[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
        missing = [name for name in self.conditions if name not in bundle]
        if missing:
            raise DimensionError(f"guidance bundle lacks condition(s) {missing}")
        sizes = {tuple(bundle[name].shape[2:]) for name in self.conditions}
        if len(sizes) > 1:
            raise DimensionError(f"guidance conditions disagree on spatial size: {sorted(sizes)}")
        return {name: encode_condition(self.nets[name], bundle[name]) for name in self.conditions}

    def forward(self, bundle: Mapping[str, torch.Tensor]) -> torch.Tensor:
        return fuse(self.encode(bundle))
