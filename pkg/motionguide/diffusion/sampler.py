"""
motionguide/diffusion/sampler.py
Deterministic DDIM sampling over a strided subsequence of timesteps.
"""

from typing import Callable, List, Optional, Union

import numpy as np
import torch
from loguru import logger

from motionguide.core.exceptions import InvalidArgumentError, NumericError
from motionguide.diffusion.schedule import DiffusionSchedule, predict_z0

Guidance = Union[None, torch.Tensor, Callable[[int], Optional[torch.Tensor]]]


def sampling_timesteps(T: int, steps: int) -> List[int]:
    """Descending, distinct timesteps round(linspace(T, 1, steps))."""
    if steps < 1:
        raise InvalidArgumentError(f"steps must be at least 1, got {steps}")
    if steps > T:
        raise InvalidArgumentError(f"steps ({steps}) cannot exceed T ({T})")
    return [int(t) for t in np.round(np.linspace(T, 1, steps)).astype(np.int64)]


def _guidance_at(guidance: Guidance, t: int) -> Optional[torch.Tensor]:
    if guidance is None or isinstance(guidance, torch.Tensor):
        return guidance
    return guidance(t)


@torch.no_grad()
def sample(
    denoiser: Callable,
    guidance: Guidance,
    sched: DiffusionSchedule,
    steps: int,
    z_T: torch.Tensor,
) -> torch.Tensor:
    """
    Denoises ``z_T`` with deterministic DDIM updates.

    At each t in the strided sequence (followed by t' = 0, where ᾱ = 1):
    ẑ0 = (z_t - sqrt(1 - ᾱ_t) ε̂) / sqrt(ᾱ_t),
    z_t' = sqrt(ᾱ_t') ẑ0 + sqrt(1 - ᾱ_t') ε̂.

    Args:
        denoiser: Callable (z_t, t, y) -> ε̂.
        guidance: None, a fixed y, or a callable t -> y.
        sched: Noise schedule.
        steps: Number of denoiser evaluations, 1 <= steps <= T.
        z_T: Initial noise.
    """
    timesteps = sampling_timesteps(sched.T, steps)
    z = z_T
    for t, t_next in zip(timesteps, timesteps[1:] + [0]):
        eps = denoiser(z, t, _guidance_at(guidance, t))
        z0_hat = predict_z0(z, t, eps, sched)
        alpha_next = sched.alpha_bar_at(t_next)
        z = torch.sqrt(alpha_next) * z0_hat + torch.sqrt(1.0 - alpha_next) * eps
        logger.debug(f"DDIM step t={t} -> {t_next}")
    if not torch.isfinite(z).all():
        raise NumericError("sampling produced non-finite values")
    return z
