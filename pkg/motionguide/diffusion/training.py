"""
motionguide/diffusion/training.py
Image-stage training of the guidance encoder and the toy denoiser, plus the
synthetic dataset whose latents are a fixed function of the guidance.
"""

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch
from loguru import logger

from motionguide.core.exceptions import DimensionError, InvalidArgumentError, NumericError
from motionguide.core.rng import make_rng, torch_normal
from motionguide.diffusion.denoiser import ToyDenoiser
from motionguide.diffusion.schedule import DiffusionSchedule, forward_diffuse, training_loss
from motionguide.guidance.conditions import CONDITION_NAMES, downsample, select_items
from motionguide.guidance.encoder import GuidanceEncoder

Bundle = Dict[str, torch.Tensor]


def synthetic_latents(bundle: Mapping[str, torch.Tensor], latent_channels: int, size: int) -> torch.Tensor:
    """
    Deterministic latent targets z0 derived from a guidance bundle.

    The condition images are averaged, area-downsampled to size x size and
    mapped from [0, 1] to [-1, 1]; latent channel c copies image channel
    c mod 3 with sign (-1)^(c div 3).
    """
    if not bundle:
        raise InvalidArgumentError("cannot derive latents from an empty bundle")
    names = [name for name in CONDITION_NAMES if name in bundle]
    mean = sum(bundle[name] for name in names) / len(names)
    base = 2.0 * downsample(mean, size) - 1.0
    channels = [base[:, c % 3] * (-1.0) ** (c // 3) for c in range(latent_channels)]
    return torch.stack(channels, dim=1)


@dataclass(frozen=True)
class SyntheticDataset:
    """Paired latents and guidance bundles held in memory."""

    latents: torch.Tensor
    guidance: Bundle

    def __len__(self) -> int:
        return int(self.latents.shape[0])

    def batch(self, indices: np.ndarray) -> Tuple[torch.Tensor, Bundle]:
        index = torch.from_numpy(np.asarray(indices, dtype=np.int64))
        return self.latents[index], select_items(self.guidance, index)

    def shuffled(self, seed: int) -> "SyntheticDataset":
        """Same latents, guidance permuted across samples by a derangement."""
        n = len(self)
        if n < 2:
            raise InvalidArgumentError("shuffling guidance needs at least two samples")
        cycle = make_rng(seed, stream=1).permutation(n)
        pairing = np.empty(n, dtype=np.int64)
        # each sample takes the guidance of its successor on a random cycle
        pairing[cycle] = np.roll(cycle, -1)
        return replace(self, guidance=select_items(self.guidance, torch.from_numpy(pairing)))


def make_synthetic_dataset(
    num_samples: int,
    latent_channels: int = 4,
    latent_size: int = 8,
    conditions: Sequence[str] = CONDITION_NAMES,
    seed: int = 0,
    cells: int = 4,
) -> SyntheticDataset:
    """
    Random piecewise-constant guidance images at 2 x latent_size with their
    synthetic latents.
    """
    if num_samples < 1:
        raise InvalidArgumentError(f"num_samples must be positive, got {num_samples}")
    side = 2 * latent_size
    if side % cells:
        raise InvalidArgumentError(f"{cells} cells do not tile a {side}x{side} guidance image")
    rng = make_rng(seed, stream=0)
    guidance = {}
    for name in conditions:
        coarse = torch.from_numpy(rng.uniform(size=(num_samples, 3, cells, cells)))
        block = side // cells
        guidance[name] = coarse.repeat_interleave(block, dim=2).repeat_interleave(block, dim=3)
    latents = synthetic_latents(guidance, latent_channels, latent_size)
    return SyntheticDataset(latents=latents, guidance=guidance)


def _parameters(denoiser: ToyDenoiser, guidance_encoder: Optional[GuidanceEncoder]) -> List[torch.nn.Parameter]:
    params = list(denoiser.parameters())
    if guidance_encoder is not None:
        params += list(guidance_encoder.parameters())
    return params


def train_step(
    denoiser: ToyDenoiser,
    guidance_encoder: Optional[GuidanceEncoder],
    batch: Tuple[torch.Tensor, Mapping[str, torch.Tensor]],
    sched: DiffusionSchedule,
    rng: np.random.Generator,
    lr: float,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> float:
    """
    One SGD step on the noise-prediction loss.

    Samples t uniform in [1, T] and eps ~ N(0, I) per item from ``rng``,
    forms z_t, encodes the guidance, predicts the noise and backpropagates
    through both the denoiser and the guidance networks.

    Returns:
        The batch loss before the update.
    """
    z0, bundle = batch
    if z0.dim() != 4:
        raise DimensionError(f"latent batch must be B x C x H x W, got {tuple(z0.shape)}")
    if lr < 0:
        raise InvalidArgumentError(f"learning rate must be nonnegative, got {lr}")
    b = z0.shape[0]
    t = torch.from_numpy(rng.integers(1, sched.T + 1, size=b))
    eps = torch_normal(rng, tuple(z0.shape))
    if optimizer is None:
        optimizer = torch.optim.SGD(_parameters(denoiser, guidance_encoder), lr=lr)

    optimizer.zero_grad()
    z_t = forward_diffuse(z0, t, eps, sched)
    y = guidance_encoder(bundle) if guidance_encoder is not None else None
    loss = training_loss(eps, denoiser(z_t, t, y), t)
    if not torch.isfinite(loss):
        raise NumericError(f"training loss became non-finite: {float(loss)}")
    loss.backward()
    optimizer.step()
    return float(loss.detach())


@dataclass
class TrainingReport:
    losses: List[float]
    window: int

    @property
    def first_mean(self) -> float:
        return float(np.mean(self.losses[: self.window]))

    @property
    def last_mean(self) -> float:
        return float(np.mean(self.losses[-self.window :]))

    def to_dict(self) -> Dict[str, float]:
        return {
            "steps": len(self.losses),
            "first_window_mean_loss": self.first_mean,
            "last_window_mean_loss": self.last_mean,
        }


def train(
    denoiser: ToyDenoiser,
    guidance_encoder: Optional[GuidanceEncoder],
    dataset: SyntheticDataset,
    sched: DiffusionSchedule,
    steps: int,
    batch_size: int,
    lr: float,
    seed: int,
    report_window: int = 50,
    on_step: Optional[Callable[[int, float], None]] = None,
) -> TrainingReport:
    """
    Runs ``steps`` train_step calls; step k draws its batch and noise from
    rng stream k + 2 of ``seed``.
    """
    if steps < 1 or batch_size < 1:
        raise InvalidArgumentError(f"steps and batch_size must be positive, got {steps}, {batch_size}")
    optimizer = torch.optim.SGD(_parameters(denoiser, guidance_encoder), lr=lr)
    losses = []
    for step in range(steps):
        rng = make_rng(seed, stream=step + 2)
        indices = rng.integers(0, len(dataset), size=batch_size)
        loss = train_step(denoiser, guidance_encoder, dataset.batch(indices), sched, rng, lr, optimizer)
        losses.append(loss)
        if on_step is not None:
            on_step(step, loss)
        if step % 100 == 0:
            logger.debug(f"step {step}: loss {loss:.6f}")
    report = TrainingReport(losses=losses, window=min(report_window, steps))
    logger.info(
        f"Trained {steps} steps: mean loss {report.first_mean:.4f} (first {report.window}) "
        f"-> {report.last_mean:.4f} (last {report.window})"
    )
    return report
