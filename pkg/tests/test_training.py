import numpy as np
import pytest
import torch

from motionguide.core.exceptions import InvalidArgumentError
from motionguide.core.rng import make_rng
from motionguide.diffusion.denoiser import ToyDenoiser
from motionguide.diffusion.schedule import make_schedule
from motionguide.diffusion.training import (
    make_synthetic_dataset,
    synthetic_latents,
    train,
    train_step,
)
from motionguide.guidance.encoder import GuidanceEncoder
from motionguide.utils.optimization import parameters_snapshot


def networks(seed=0, hidden=8):
    torch.manual_seed(seed)
    encoder = GuidanceEncoder(conditions=("depth", "skeleton"), conv_channels=(4, 8), conv_strides=(1, 2))
    return encoder, ToyDenoiser(hidden_channels=hidden, embed_dim=8)


def test_synthetic_latents_of_constant_bundle():
    bundle = {"depth": torch.ones(2, 3, 8, 8, dtype=torch.float64)}
    z0 = synthetic_latents(bundle, latent_channels=4, size=4)
    assert z0.shape == (2, 4, 4, 4)
    assert torch.all(z0[:, :3] == 1.0)
    assert torch.all(z0[:, 3] == -1.0)


def test_dataset_shapes():
    dataset = make_synthetic_dataset(6, latent_size=4, conditions=("depth", "skeleton"))
    assert len(dataset) == 6
    assert dataset.latents.shape == (6, 4, 4, 4)
    assert dataset.guidance["skeleton"].shape == (6, 3, 8, 8)
    assert float(dataset.latents.abs().max()) <= 1.0


def test_dataset_is_seeded():
    a = make_synthetic_dataset(3, latent_size=4, seed=5)
    b = make_synthetic_dataset(3, latent_size=4, seed=5)
    assert torch.equal(a.latents, b.latents)


def test_shuffled_guidance_is_a_derangement():
    dataset = make_synthetic_dataset(7, latent_size=4, conditions=("depth",))
    shuffled = dataset.shuffled(seed=3)
    assert torch.equal(shuffled.latents, dataset.latents)
    originals = [dataset.guidance["depth"][i] for i in range(7)]
    matches = []
    for i in range(7):
        found = [j for j, g in enumerate(originals) if torch.equal(g, shuffled.guidance["depth"][i])]
        assert len(found) == 1
        matches.append(found[0])
    assert sorted(matches) == list(range(7))
    assert all(i != j for i, j in enumerate(matches))


def test_shuffle_needs_two_samples():
    with pytest.raises(InvalidArgumentError):
        make_synthetic_dataset(1, latent_size=4).shuffled(seed=0)


def test_zero_learning_rate_keeps_weights():
    encoder, denoiser = networks()
    dataset = make_synthetic_dataset(4, latent_size=4, conditions=("depth", "skeleton"))
    before = {**parameters_snapshot(encoder), **{f"d.{k}": v for k, v in parameters_snapshot(denoiser).items()}}
    train_step(denoiser, encoder, dataset.batch(np.arange(4)), make_schedule(T=100), make_rng(0), lr=0.0)
    after = {**parameters_snapshot(encoder), **{f"d.{k}": v for k, v in parameters_snapshot(denoiser).items()}}
    assert all(torch.equal(before[name], after[name]) for name in before)


def test_step_updates_guidance_output_layer():
    encoder, denoiser = networks()
    dataset = make_synthetic_dataset(4, latent_size=4, conditions=("depth", "skeleton"))
    train_step(denoiser, encoder, dataset.batch(np.arange(4)), make_schedule(T=100), make_rng(0), lr=0.1)
    assert torch.count_nonzero(encoder.nets["depth"].out_layer.weight) > 0


def test_training_is_deterministic():
    dataset = make_synthetic_dataset(8, latent_size=4, conditions=("depth", "skeleton"))
    sched = make_schedule(T=100)
    runs = []
    for _ in range(2):
        encoder, denoiser = networks()
        report = train(denoiser, encoder, dataset, sched, steps=5, batch_size=2, lr=0.05, seed=11)
        runs.append((report.losses, parameters_snapshot(denoiser)))
    assert runs[0][0] == runs[1][0]
    assert all(torch.equal(runs[0][1][k], runs[1][1][k]) for k in runs[0][1])


def test_report_windows():
    dataset = make_synthetic_dataset(4, latent_size=4, conditions=("depth", "skeleton"))
    encoder, denoiser = networks()
    seen = []
    report = train(denoiser, encoder, dataset, make_schedule(T=50), steps=3, batch_size=2, lr=0.01, seed=0,
                   on_step=lambda step, loss: seen.append(step))
    assert seen == [0, 1, 2]
    assert report.window == 3
    assert report.to_dict()["steps"] == 3


@pytest.mark.slow
def test_guidance_helps_the_toy_denoiser():
    sched = make_schedule()
    guided_means, shuffled_means = [], []
    for seed in range(3):
        dataset = make_synthetic_dataset(32, latent_size=8, conditions=("depth", "skeleton"), seed=seed)
        encoder, denoiser = networks(seed, hidden=16)
        guided = train(denoiser, encoder, dataset, sched, steps=500, batch_size=4, lr=0.05, seed=seed)
        assert guided.last_mean < 0.5 * guided.first_mean

        encoder, denoiser = networks(seed, hidden=16)
        shuffled = train(denoiser, encoder, dataset.shuffled(seed), sched, steps=500, batch_size=4, lr=0.05, seed=seed)
        guided_means.append(guided.last_mean)
        shuffled_means.append(shuffled.last_mean)
    assert np.mean(guided_means) < np.mean(shuffled_means)
