from motionguide.diffusion.denoiser import ToyDenoiser, timestep_embedding
from motionguide.diffusion.sampler import sample, sampling_timesteps
from motionguide.diffusion.schedule import (
    DiffusionSchedule,
    forward_diffuse,
    make_schedule,
    predict_z0,
    training_loss,
)
from motionguide.diffusion.training import (
    SyntheticDataset,
    make_synthetic_dataset,
    synthetic_latents,
    train,
    train_step,
)

__all__ = [
    "ToyDenoiser",
    "timestep_embedding",
    "sample",
    "sampling_timesteps",
    "DiffusionSchedule",
    "forward_diffuse",
    "make_schedule",
    "predict_z0",
    "training_loss",
    "SyntheticDataset",
    "make_synthetic_dataset",
    "synthetic_latents",
    "train",
    "train_step",
]
