"""
motionguide/diffusion/schedule.py
Variance-preserving noise schedule, forward diffusion and the noise-prediction
loss.

Timesteps are 1-based: t = 1..T indexes alpha_bar[t - 1]; t = 0 denotes the
clean latent (alpha_bar = 1).
"""

from dataclasses import dataclass
from typing import Callable, Optional, Union

import torch
from loguru import logger

from motionguide.core.exceptions import DimensionError, InvalidArgumentError

DTYPE = torch.float64

Timestep = Union[int, torch.Tensor]


@dataclass(frozen=True)
class DiffusionSchedule:
    """Linear beta schedule and its cumulative products."""

    betas: torch.Tensor
    alpha_bar: torch.Tensor

    @property
    def T(self) -> int:
        return int(self.betas.shape[0])

    def check_timestep(self, t: Timestep, allow_zero: bool = False) -> None:
        lo = 0 if allow_zero else 1
        values = t if isinstance(t, torch.Tensor) else torch.tensor([int(t)])
        if values.numel() and (int(values.min()) < lo or int(values.max()) > self.T):
            raise InvalidArgumentError(f"timestep {values.tolist()} outside [{lo}, {self.T}]")

    def alpha_bar_at(self, t: Timestep) -> torch.Tensor:
        """ᾱ_t for an int or a tensor of timesteps; t = 0 gives 1."""
        self.check_timestep(t, allow_zero=True)
        padded = torch.cat([torch.ones(1, dtype=DTYPE), self.alpha_bar])
        if isinstance(t, torch.Tensor):
            return padded[t.long()]
        return padded[int(t)]


def make_schedule(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    """
    Linear beta_t from beta_start to beta_end over T steps.

    Raises:
        InvalidArgumentError: T < 1 or not 0 < beta_start <= beta_end < 1.
    """
    if T < 1:
        raise InvalidArgumentError(f"T must be at least 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidArgumentError(
            f"need 0 < beta_start <= beta_end < 1, got beta_start={beta_start}, beta_end={beta_end}"
        )
    betas = torch.linspace(beta_start, beta_end, T, dtype=DTYPE)
    alpha_bar = torch.cumprod(1.0 - betas, dim=0)
    logger.debug(f"Schedule T={T}: alpha_bar[T]={float(alpha_bar[-1]):.3e}")
    return DiffusionSchedule(betas=betas, alpha_bar=alpha_bar)


def _per_item(scalars: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    if scalars.dim() == 0:
        return scalars
    if scalars.shape[0] != like.shape[0]:
        raise DimensionError(
            f"{scalars.shape[0]} timesteps for a batch of {like.shape[0]} latents"
        )
    return scalars.reshape((-1,) + (1,) * (like.dim() - 1))


def forward_diffuse(
    z0: torch.Tensor, t: Timestep, eps: torch.Tensor, sched: DiffusionSchedule
) -> torch.Tensor:
    """z_t = sqrt(ᾱ_t) z0 + sqrt(1 - ᾱ_t) eps; a tensor ``t`` gives one step per batch item."""
    if z0.shape != eps.shape:
        raise DimensionError(f"z0 {tuple(z0.shape)} and eps {tuple(eps.shape)} differ in shape")
    sched.check_timestep(t)
    alpha_bar = _per_item(sched.alpha_bar_at(t), z0)
    return torch.sqrt(alpha_bar) * z0 + torch.sqrt(1.0 - alpha_bar) * eps


def predict_z0(
    z_t: torch.Tensor, t: Timestep, eps: torch.Tensor, sched: DiffusionSchedule
) -> torch.Tensor:
    """Inverts forward_diffuse for a known (or predicted) noise."""
    alpha_bar = _per_item(sched.alpha_bar_at(t), z_t)
    return (z_t - torch.sqrt(1.0 - alpha_bar) * eps) / torch.sqrt(alpha_bar)


def training_loss(
    eps_true: torch.Tensor,
    eps_pred: torch.Tensor,
    t: Optional[Timestep] = None,
    weight_fn: Optional[Callable[[int], float]] = None,
) -> torch.Tensor:
    """
    ω(t) · mean((eps_true - eps_pred)²), ω ≡ 1 by default.

    With a tensor ``t`` the weight is applied per batch item before averaging.
    Returns a 0-dim tensor so it can be backpropagated.
    """
    if eps_true.shape != eps_pred.shape:
        raise DimensionError(
            f"eps_true {tuple(eps_true.shape)} and eps_pred {tuple(eps_pred.shape)} differ in shape"
        )
    squared = (eps_true - eps_pred) ** 2
    if weight_fn is None or t is None:
        return squared.mean()
    if isinstance(t, torch.Tensor) and t.dim() == 1:
        per_item = squared.reshape(squared.shape[0], -1).mean(dim=1)
        weights = torch.tensor([float(weight_fn(int(s))) for s in t], dtype=per_item.dtype)
        return (weights * per_item).mean()
    return float(weight_fn(int(t))) * squared.mean()
