# motionguide/utils/optimization.py

from typing import Dict, Iterable, Optional

import torch
from loguru import logger


def set_zero_parameters(module: torch.nn.Module) -> torch.nn.Module:
    """
    Zeroes every parameter of a module in place.

    Args:
        module: The module whose weights and biases are cleared.

    Returns:
        The same module, for chaining at construction time.
    """
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def count_parameters(modules: Iterable[torch.nn.Module]) -> int:
    """Total number of trainable scalars across ``modules``."""
    return sum(p.numel() for m in modules for p in m.parameters() if p.requires_grad)


def configure_torch(num_threads: Optional[int] = None) -> None:
    """
    Puts torch into the reproducible CPU mode the pipeline relies on.

    Deterministic algorithms are requested so repeated runs with the same seed
    produce byte-identical outputs.

    Args:
        num_threads: Intra-op thread count; left unchanged when None.
    """
    try:
        torch.use_deterministic_algorithms(True)
    except Exception as e:
        logger.warning(f"Could not enable deterministic algorithms: {e}")
    if num_threads is not None:
        torch.set_num_threads(num_threads)
        logger.debug(f"torch intra-op threads set to {num_threads}")


def parameters_snapshot(module: torch.nn.Module) -> Dict[str, torch.Tensor]:
    """Detached copy of a module's parameters keyed by name."""
    return {name: p.detach().clone() for name, p in module.named_parameters()}
