"""
motionguide/temporal/temporal_agg.py
Overlapping fixed-length windows over a long frame sequence and the blend that
merges per-window outputs back into one sequence.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
import torch

from motionguide.core.enums import BlendWeighting
from motionguide.core.exceptions import DimensionError, InvalidArgumentError

MAX_WINDOW_LEN = 1024

WindowOutput = Union[torch.Tensor, Sequence[torch.Tensor]]


@dataclass(frozen=True)
class WindowPlan:
    windows: Tuple[Tuple[int, int], ...]
    window_len: int
    stride: int
    num_frames: int

    def coverage(self) -> np.ndarray:
        """Number of windows covering each frame."""
        counts = np.zeros(self.num_frames, dtype=np.int64)
        for start, end in self.windows:
            counts[start:end] += 1
        return counts

    def to_list(self) -> List[List[int]]:
        return [[start, end] for start, end in self.windows]


def plan_windows(num_frames: int, window_len: int = 24, stride: int = 12) -> WindowPlan:
    """
    Windows at starts 0, stride, 2·stride, ...; a final window shifted left to
    end at num_frames covers any remainder. A sequence shorter than the window
    is a single window [0, num_frames).
    """
    if num_frames < 1:
        raise InvalidArgumentError(f"num_frames must be at least 1, got {num_frames}")
    if not 1 <= window_len <= MAX_WINDOW_LEN:
        raise InvalidArgumentError(f"window_len must be in [1, {MAX_WINDOW_LEN}], got {window_len}")
    if not 1 <= stride <= window_len:
        raise InvalidArgumentError(f"stride must be in [1, window_len={window_len}], got {stride}")
    if num_frames <= window_len:
        return WindowPlan(((0, num_frames),), window_len, stride, num_frames)
    windows = [(start, start + window_len) for start in range(0, num_frames - window_len + 1, stride)]
    if windows[-1][1] < num_frames:
        windows.append((num_frames - window_len, num_frames))
    return WindowPlan(tuple(windows), window_len, stride, num_frames)


def window_weights(length: int, weighting: str = BlendWeighting.TRIANGULAR.value) -> np.ndarray:
    """Triangular 1 + min(pos, length - 1 - pos), or all ones."""
    mode = BlendWeighting(weighting)
    if mode is BlendWeighting.UNIFORM:
        return np.ones(length)
    pos = np.arange(length)
    return 1.0 + np.minimum(pos, length - 1 - pos)


def _frames(output: WindowOutput) -> List[torch.Tensor]:
    if isinstance(output, torch.Tensor):
        return list(output.unbind(0))
    return list(output)


def aggregate(
    plan: WindowPlan,
    window_outputs: Sequence[WindowOutput],
    weighting: str = BlendWeighting.TRIANGULAR.value,
) -> torch.Tensor:
    """
    Blends per-window frame tensors into num_frames x ... output.

    Each frame is the normalized weighted mean of the windows covering it,
    accumulated as a running mean in window order so equal inputs come out
    unchanged.
    """
    if len(window_outputs) != len(plan.windows):
        raise DimensionError(
            f"{len(window_outputs)} window outputs for {len(plan.windows)} planned windows"
        )
    means: List = [None] * plan.num_frames
    totals = np.zeros(plan.num_frames)
    shape = None
    for (start, end), output in zip(plan.windows, window_outputs):
        frames = _frames(output)
        if len(frames) != end - start:
            raise DimensionError(
                f"window ({start}, {end}) produced {len(frames)} frames, expected {end - start}"
            )
        weights = window_weights(end - start, weighting)
        for offset, frame in enumerate(frames):
            if shape is None:
                shape = frame.shape
            elif frame.shape != shape:
                raise DimensionError(f"frame tensors differ in shape: {tuple(shape)} vs {tuple(frame.shape)}")
            f = start + offset
            totals[f] += weights[offset]
            if means[f] is None:
                means[f] = frame.clone()
            else:
                means[f] = means[f] + (weights[offset] / totals[f]) * (frame - means[f])
    missing = [f for f, m in enumerate(means) if m is None]
    if missing:
        raise DimensionError(f"frames {missing[:10]} are not covered by any window")
    return torch.stack(means)
