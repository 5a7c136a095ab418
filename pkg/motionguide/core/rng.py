"""
motionguide/core/rng.py - Deterministic random streams

All randomness derives from one integer seed. Streams are separated by putting
the stream index in the high word of the Philox counter, so stream k of seed s
is the same sequence on every platform and independent of how many numbers
other streams consumed.
"""

from contextlib import contextmanager
from typing import Iterator, Sequence

import numpy as np
import torch

from motionguide.core.exceptions import InvalidArgumentError

_MAX_KEY = 2**128


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a Philox-backed generator for ``(seed, stream)``."""
    if seed < 0 or seed >= _MAX_KEY:
        raise InvalidArgumentError(f"seed must be in [0, 2**128), got {seed}")
    if stream < 0 or stream >= 2**64:
        raise InvalidArgumentError(f"stream must be in [0, 2**64), got {stream}")
    bit_generator = np.random.Philox(key=seed, counter=[0, 0, 0, stream])
    return np.random.Generator(bit_generator)


def torch_normal(rng: np.random.Generator, shape: Sequence[int]) -> torch.Tensor:
    """Draw float64 standard normals from ``rng`` as a torch tensor."""
    return torch.from_numpy(rng.standard_normal(tuple(shape)))


@contextmanager
def seeded_torch(seed: int) -> Iterator[None]:
    """Run a block with torch's global RNG seeded, restoring it afterwards."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield
