"""
motionguide/diffusion/denoiser.py
Toy conditional noise predictor ε̂ = denoiser(z_t, t, y).
"""

import math
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from motionguide.core.enums import FusionMode
from motionguide.core.exceptions import DimensionError, InvalidArgumentError
from motionguide.diffusion.schedule import Timestep

DTYPE = torch.float64
TIME_CHANNELS = 4


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal embedding, (B,) -> (B, dim): [sin(t f_i), cos(t f_i)]."""
    if dim < 2 or dim % 2:
        raise InvalidArgumentError(f"embedding dimension must be even and >= 2, got {dim}")
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=DTYPE) / half)
    args = t.to(DTYPE)[:, None] * freqs[None]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class ToyDenoiser(nn.Module):
    """
    Three 3x3 convolutions with SiLU between them.

    Input is the noisy latent with the guidance feature added (or concatenated
    in concat mode) plus TIME_CHANNELS broadcast channels from a linear
    projection of the sinusoidal timestep embedding.
    """

    def __init__(
        self,
        latent_channels: int = 4,
        hidden_channels: int = 32,
        embed_dim: int = 16,
        fusion: str = FusionMode.ADD.value,
        guidance_channels: Optional[int] = None,
    ):
        super().__init__()
        self.latent_channels = latent_channels
        self.embed_dim = embed_dim
        self.fusion = FusionMode(fusion)
        self.guidance_channels = guidance_channels or latent_channels
        if self.fusion is FusionMode.ADD and self.guidance_channels != latent_channels:
            raise InvalidArgumentError(
                "additive fusion needs guidance channels equal to latent channels, got "
                f"{self.guidance_channels} vs {latent_channels}"
            )
        extra = self.guidance_channels if self.fusion is FusionMode.CONCAT else 0
        in_channels = latent_channels + extra + TIME_CHANNELS
        self.time_proj = nn.Linear(embed_dim, TIME_CHANNELS, dtype=DTYPE)
        self.conv_in = nn.Conv2d(in_channels, hidden_channels, 3, padding=1, dtype=DTYPE)
        self.conv_mid = nn.Conv2d(hidden_channels, hidden_channels, 3, padding=1, dtype=DTYPE)
        self.conv_out = nn.Conv2d(hidden_channels, latent_channels, 3, padding=1, dtype=DTYPE)

    def _timesteps(self, t: Timestep, batch: int) -> torch.Tensor:
        if isinstance(t, torch.Tensor) and t.dim() == 1:
            if t.shape[0] != batch:
                raise DimensionError(f"{t.shape[0]} timesteps for a batch of {batch}")
            return t
        return torch.full((batch,), int(t), dtype=torch.long)

    def _condition(self, z_t: torch.Tensor, y: Optional[torch.Tensor]) -> torch.Tensor:
        if self.fusion is FusionMode.CONCAT:
            if y is None:
                shape = (z_t.shape[0], self.guidance_channels) + tuple(z_t.shape[2:])
                y = torch.zeros(shape, dtype=z_t.dtype)
            if y.shape[0] != z_t.shape[0] or y.shape[2:] != z_t.shape[2:] or y.shape[1] != self.guidance_channels:
                raise DimensionError(
                    f"guidance {tuple(y.shape)} cannot be concatenated to latent {tuple(z_t.shape)}"
                )
            return torch.cat([z_t, y], dim=1)
        if y is None:
            return z_t
        if y.shape != z_t.shape:
            raise DimensionError(
                f"guidance {tuple(y.shape)} does not match latent {tuple(z_t.shape)}"
            )
        return z_t + y

    def forward(self, z_t: torch.Tensor, t: Timestep, y: Optional[torch.Tensor] = None) -> torch.Tensor:
        if z_t.dim() != 4 or z_t.shape[1] != self.latent_channels:
            raise DimensionError(
                f"latent must be B x {self.latent_channels} x H x W, got {tuple(z_t.shape)}"
            )
        x = self._condition(z_t, y)
        b, _, h, w = x.shape
        emb = self.time_proj(timestep_embedding(self._timesteps(t, b), self.embed_dim))
        x = torch.cat([x, emb[:, :, None, None].expand(b, TIME_CHANNELS, h, w)], dim=1)
        x = F.silu(self.conv_in(x))
        x = F.silu(self.conv_mid(x))
        return self.conv_out(x)
