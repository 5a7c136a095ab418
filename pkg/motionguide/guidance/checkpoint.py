"""
motionguide/guidance/checkpoint.py
CHMPNETS weight container shared by the guidance networks and the denoiser.

Layout (little-endian): magic "CHMPNETS", u32 version, u32 section count; per
section u32 name length, UTF-8 name, u32 array count; per array u32 name
length, UTF-8 name, u32 ndim, ndim x u32 dims, f64 data.
"""

import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np
import torch
import torch.nn as nn
from loguru import logger

from motionguide.core.exceptions import ModelFormatError, StorageError

MAGIC = b"CHMPNETS"
VERSION = 1

Sections = Dict[str, Dict[str, np.ndarray]]


def _name_bytes(name: str) -> bytes:
    encoded = name.encode("utf-8")
    return struct.pack("<I", len(encoded)) + encoded


def encode_sections(sections: Mapping[str, Mapping[str, np.ndarray]]) -> bytes:
    chunks = [MAGIC, struct.pack("<2I", VERSION, len(sections))]
    for section, arrays in sections.items():
        chunks.append(_name_bytes(section))
        chunks.append(struct.pack("<I", len(arrays)))
        for name, array in arrays.items():
            array = np.ascontiguousarray(array, dtype="<f8")
            chunks.append(_name_bytes(name))
            chunks.append(struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape))
            chunks.append(array.tobytes())
    return b"".join(chunks)


class _Cursor:
    def __init__(self, payload: bytes, path: Path):
        self.payload = payload
        self.path = path
        self.offset = 0

    def unpack(self, fmt: str, what: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.payload):
            raise ModelFormatError(f"{self.path}: truncated while reading {what}")
        values = struct.unpack_from(fmt, self.payload, self.offset)
        self.offset += size
        return values

    def name(self, what: str) -> str:
        (length,) = self.unpack("<I", what)
        if self.offset + length > len(self.payload):
            raise ModelFormatError(f"{self.path}: truncated while reading {what}")
        raw = self.payload[self.offset : self.offset + length]
        self.offset += length
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelFormatError(f"{self.path}: {what} is not valid UTF-8") from e

    def array(self, shape, what: str) -> np.ndarray:
        count = int(np.prod(shape)) if len(shape) else 1
        end = self.offset + 8 * count
        if end > len(self.payload):
            raise ModelFormatError(f"{self.path}: truncated while reading {what}")
        out = np.frombuffer(self.payload, dtype="<f8", count=count, offset=self.offset)
        self.offset = end
        return out.reshape(shape).astype(np.float64)


def decode_sections(payload: bytes, path: Path) -> Sections:
    if payload[:8] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {payload[:8]!r}, expected {MAGIC!r}")
    cursor = _Cursor(payload, path)
    cursor.offset = 8
    version, section_count = cursor.unpack("<2I", "header")
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported CHMPNETS version {version}")
    sections: Sections = {}
    for _ in range(section_count):
        section = cursor.name("section name")
        (array_count,) = cursor.unpack("<I", f"array count of '{section}'")
        arrays = {}
        for _ in range(array_count):
            name = cursor.name(f"array name in '{section}'")
            (ndim,) = cursor.unpack("<I", f"rank of '{section}/{name}'")
            shape = cursor.unpack(f"<{ndim}I", f"dims of '{section}/{name}'")
            arrays[name] = cursor.array(shape, f"'{section}/{name}'")
        sections[section] = arrays
    if cursor.offset != len(payload):
        raise ModelFormatError(f"{path}: {len(payload) - cursor.offset} trailing bytes")
    return sections


def module_arrays(module: nn.Module) -> Dict[str, np.ndarray]:
    return {name: tensor.detach().cpu().numpy() for name, tensor in module.state_dict().items()}


def save_checkpoint(modules: Mapping[str, nn.Module], path: Union[str, Path]) -> Path:
    """Writes one section per named module."""
    path = Path(path)
    payload = encode_sections({name: module_arrays(m) for name, m in modules.items()})
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as e:
        raise StorageError(f"Cannot write checkpoint {path}: {e}") from e
    logger.info(f"Saved checkpoint {path} ({len(modules)} sections, {len(payload)} bytes)")
    return path


def read_checkpoint(path: Union[str, Path]) -> Sections:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except FileNotFoundError as e:
        raise StorageError(f"Checkpoint not found: {path}") from e
    except OSError as e:
        raise StorageError(f"Cannot read checkpoint {path}: {e}") from e
    return decode_sections(payload, path)


def load_into(module: nn.Module, arrays: Mapping[str, np.ndarray], section: str, path=None) -> None:
    """
    Copies a section's arrays into ``module``.

    Raises:
        ModelFormatError: Missing, extra or mis-shaped arrays for the
            configured architecture.
    """
    where = f"{path}: " if path is not None else ""
    expected = module.state_dict()
    missing = sorted(set(expected) - set(arrays))
    extra = sorted(set(arrays) - set(expected))
    if missing or extra:
        raise ModelFormatError(
            f"{where}section '{section}' does not match the configured architecture "
            f"(missing {missing}, unexpected {extra})"
        )
    state = {}
    for name, tensor in expected.items():
        if tuple(arrays[name].shape) != tuple(tensor.shape):
            raise ModelFormatError(
                f"{where}'{section}/{name}' has shape {tuple(arrays[name].shape)}, "
                f"configured architecture expects {tuple(tensor.shape)}"
            )
        state[name] = torch.from_numpy(np.array(arrays[name], dtype=np.float64))
    module.load_state_dict(state)


def load_checkpoint(modules: Mapping[str, nn.Module], path: Union[str, Path]) -> None:
    """Loads every named module from its section of the checkpoint at ``path``."""
    sections = read_checkpoint(path)
    for name, module in modules.items():
        if name not in sections:
            raise ModelFormatError(f"{path}: checkpoint has no section '{name}'")
        load_into(module, sections[name], name, path)
    logger.info(f"Loaded checkpoint {path}: sections {sorted(modules)}")
