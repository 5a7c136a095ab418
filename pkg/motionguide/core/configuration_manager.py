"""
motionguide/core/configuration_manager.py
Configuration management system
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from loguru import logger

from motionguide.core.exceptions import ConfigurationError

ENV_PREFIX = "MOTIONGUIDE_"

# Top-level sections whose names contain an underscore; env keys are split on
# "_" so these need to be matched before splitting.
_COMPOUND_SECTIONS = ("toy_body",)
_KEY_ALIASES = {"t": "T"}

SECTIONS = (
    "system",
    "paths",
    "toy_body",
    "alignment",
    "render",
    "encoder",
    "diffusion",
    "training",
    "temporal",
)


class Config:
    def __init__(self, config_path: Optional[str] = None, use_env: bool = True):
        self.config_path = Path(config_path) if config_path else None
        self.data = self._load_config(use_env)
        self._validate_config()

    def _validate_config(self):
        """Validate the configuration and set default values for missing keys."""
        if not isinstance(self.data, dict):
            raise ConfigurationError("Configuration root must be a JSON object")
        for section in SECTIONS:
            if not isinstance(self.data.get(section, {}), dict):
                raise ConfigurationError(f"Config section '{section}' must be an object")

        # System defaults
        self.data.setdefault("system", {})
        self.data["system"].setdefault("log_level", "INFO")

        # Paths defaults
        self.data.setdefault("paths", {})
        self.data["paths"].setdefault("body_model", None)
        self.data["paths"].setdefault("motion", None)
        self.data["paths"].setdefault("reference_shape", None)
        self.data["paths"].setdefault("aligned_motion", None)
        self.data["paths"].setdefault("maps_dir", None)
        self.data["paths"].setdefault("checkpoint", None)
        self.data["paths"].setdefault("output_dir", "output")

        # Procedural body defaults
        self.data.setdefault("toy_body", {})
        self.data["toy_body"].setdefault("num_vertices", 100)
        self.data["toy_body"].setdefault("num_joints", 5)
        self.data["toy_body"].setdefault("num_shape", 10)
        self.data["toy_body"].setdefault("num_parts", 5)
        self.data["toy_body"].setdefault("pose_correctives", False)

        # Alignment defaults
        self.data.setdefault("alignment", {})
        self.data["alignment"].setdefault("enabled", True)
        self.data["alignment"].setdefault("reference_bbox", None)
        self.data["alignment"].setdefault("anchor_frame", 0)

        # Render defaults
        self.data.setdefault("render", {})
        self.data["render"].setdefault("width", 256)
        self.data["render"].setdefault("height", 256)
        self.data["render"].setdefault("back_face_culling", True)
        self.data["render"].setdefault("bone_width", 3.0)
        self.data["render"].setdefault("joint_radius", 4.0)
        self.data["render"].setdefault("workers", 1)

        # Encoder defaults
        self.data.setdefault("encoder", {})
        self.data["encoder"].setdefault(
            "conditions", ["depth", "normal", "semantic", "skeleton"]
        )
        self.data["encoder"].setdefault("conv_channels", [16, 32])
        self.data["encoder"].setdefault("conv_strides", [1, 2])
        self.data["encoder"].setdefault("use_attention", True)
        self.data["encoder"].setdefault("fusion", "add")

        # Diffusion defaults
        self.data.setdefault("diffusion", {})
        self.data["diffusion"].setdefault("T", 1000)
        self.data["diffusion"].setdefault("beta_start", 1e-4)
        self.data["diffusion"].setdefault("beta_end", 0.02)
        self.data["diffusion"].setdefault("sampling_steps", 10)
        self.data["diffusion"].setdefault("latent_channels", 4)
        self.data["diffusion"].setdefault("latent_size", 8)
        self.data["diffusion"].setdefault("hidden_channels", 32)
        self.data["diffusion"].setdefault("embed_dim", 16)

        # Training defaults
        self.data.setdefault("training", {})
        self.data["training"].setdefault("lr", 0.05)
        self.data["training"].setdefault("steps", 500)
        self.data["training"].setdefault("batch_size", 4)

        # Temporal aggregation defaults
        self.data.setdefault("temporal", {})
        self.data["temporal"].setdefault("window_len", 24)
        self.data["temporal"].setdefault("stride", 12)
        self.data["temporal"].setdefault("weighting", "triangular")

        self.data.setdefault("seed", 0)

    def _load_config(self, use_env: bool) -> Dict[str, Any]:
        """Load configuration from JSON file and merge with environment variables."""
        config_data: Dict[str, Any] = {}
        if self.config_path is not None:
            try:
                with open(self.config_path, "r", encoding="utf-8") as f:
                    config_data = json.load(f)
            except FileNotFoundError:
                raise ConfigurationError(f"Config file not found: {self.config_path}")
            except json.JSONDecodeError as e:
                raise ConfigurationError(
                    f"Invalid JSON in config file: {self.config_path}: {e}"
                ) from e

        if not use_env:
            return config_data

        load_dotenv()
        # Convert MOTIONGUIDE_ prefixed environment variables to nested config
        for key, value in os.environ.items():
            if not key.startswith(ENV_PREFIX):
                continue
            remainder = key[len(ENV_PREFIX) :].lower()
            config_key_path = _split_env_key(remainder)

            current_level = config_data
            for i, part in enumerate(config_key_path):
                if i == len(config_key_path) - 1:
                    current_level[part] = _decode_env_value(value)
                else:
                    if part not in current_level or not isinstance(
                        current_level[part], dict
                    ):
                        current_level[part] = {}
                    current_level = current_level[part]
            logger.debug(f"Config override from environment: {key}")
        return config_data

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value"""
        return self.data.get(key, default)

    def section(self, name: str) -> Dict[str, Any]:
        """Return a config section as a dict."""
        return self.data.get(name, {})

    def __contains__(self, key: str) -> bool:
        return key in self.data


def _split_env_key(remainder: str):
    for section in _COMPOUND_SECTIONS:
        if remainder.startswith(section + "_"):
            return [section, remainder[len(section) + 1 :]]
    section, _, rest = remainder.partition("_")
    if not rest:
        return [section]
    return [section, _KEY_ALIASES.get(rest, rest)]


def _decode_env_value(value: str) -> Any:
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value
