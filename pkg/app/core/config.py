"""
Configuration settings for the segmentation pipeline

Process-level settings come from the environment (.env supported).
Experiment settings live in ModelConfig / TrainConfig and can be read
from a plain key=value config file whose keys mirror the field names.
"""
import os
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .exceptions import ConfigError

load_dotenv()

# Runtime Configuration
DEVICE = os.getenv("MICROSEGNET_DEVICE", "cpu")
LOG_LEVEL = os.getenv("MICROSEGNET_LOG_LEVEL", "INFO")
DEFAULT_RUN_DIR = os.getenv("MICROSEGNET_RUN_DIR", "runs")
NUM_WORKERS = int(os.getenv("MICROSEGNET_NUM_WORKERS", "1"))
PROGRESS_BARS = os.getenv("MICROSEGNET_PROGRESS", "true").lower() == "true"

# Numerical Configuration
PROB_EPSILON = 1e-7  # clamp for probabilities before logs
DEFAULT_SPACING_MM = (0.1, 0.1)

# Artifact format identifiers
CHECKPOINT_FORMAT = "microsegnet-ckpt-v1"
DATASET_FORMAT = "microsegnet-dataset-v1"


class ModelConfig(BaseModel):
    """Network shape configuration"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    preset_name: str = "tiny"
    input_size: int = 224
    patch_size: int = 16
    embed_dim: int = 128
    num_layers: int = 4
    num_heads: int = 4
    stem_channels: Tuple[int, int, int] = (32, 64, 128)
    mlp_ratio: float = 4.0
    stem_mode: str = "hybrid"
    dropout: float = 0.0

    @field_validator("stem_mode")
    @classmethod
    def _check_stem_mode(cls, value):
        if value not in ("hybrid", "pure"):
            raise ValueError(f"stem_mode must be 'hybrid' or 'pure', got {value!r}")
        return value

    @field_validator("stem_channels", mode="before")
    @classmethod
    def _parse_channels(cls, value):
        if isinstance(value, str):
            value = tuple(int(part) for part in value.replace("/", ",").split(",") if part.strip())
        return value

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.input_size < 16 or self.input_size % 16 != 0:
            raise ValueError(f"input_size must be a positive multiple of 16, got {self.input_size}")
        if self.patch_size % 8 != 0 or self.patch_size < 8:
            raise ValueError(f"patch_size must be a multiple of 8 (the stem reduces by 8), got {self.patch_size}")
        if self.input_size % self.patch_size != 0:
            raise ValueError(f"patch_size {self.patch_size} must divide input_size {self.input_size}")
        if self.embed_dim % self.num_heads != 0:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")
        if min(self.stem_channels) < 2 or self.num_layers < 1 or self.mlp_ratio <= 0:
            raise ValueError("stem_channels, num_layers and mlp_ratio must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        return self

    @property
    def grid_size(self) -> int:
        """Token grid side length"""
        return self.input_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        """N = HW / P^2"""
        return self.grid_size ** 2

    @property
    def feature_patch_size(self) -> int:
        """Patch side on the 1/8 stem feature map in hybrid mode"""
        return self.patch_size // 8


class TrainConfig(BaseModel):
    """Optimization protocol configuration"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = 8
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 10
    num_runs: int = 8
    w_hard: float = 12.0
    w_easy: float = 1.0
    deep_supervision: bool = True
    seed: int = 0
    threshold: float = 0.5
    val_fraction: float = 0.1
    lr_schedule: str = "none"
    augment: bool = False
    dilate_px: int = 0
    device: str = DEVICE
    workers: int = NUM_WORKERS

    @model_validator(mode="after")
    def _check_values(self):
        if not self.w_hard >= self.w_easy >= 1.0:
            raise ValueError(f"weights must satisfy w_hard >= w_easy >= 1, got ({self.w_hard}, {self.w_easy})")
        for name in ("batch_size", "learning_rate", "epochs", "num_runs", "workers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.momentum < 0 or self.weight_decay < 0 or self.seed < 0 or self.dilate_px < 0:
            raise ValueError("momentum, weight_decay, seed and dilate_px must be non-negative")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.lr_schedule not in ("none", "poly"):
            raise ValueError(f"lr_schedule must be 'none' or 'poly', got {self.lr_schedule!r}")
        return self

    @property
    def weight_ratio(self) -> float:
        return self.w_hard / self.w_easy

    @property
    def scale_coefficients(self) -> Dict[str, float]:
        """Per-head loss coefficients of the combined training loss"""
        from app.modules.losses.services import SCALE_COEFFICIENTS
        if not self.deep_supervision:
            return {"p1": SCALE_COEFFICIENTS["p1"]}
        return dict(SCALE_COEFFICIENTS)


PRESETS: Dict[str, Dict[str, Any]] = {
    "tiny": {"embed_dim": 128, "num_layers": 4, "num_heads": 4, "stem_channels": (32, 64, 128)},
    # ViT-Base sized; D, L and heads are a reconstruction
    "paper": {"embed_dim": 768, "num_layers": 12, "num_heads": 12, "stem_channels": (64, 128, 256)},
}

_MODEL_KEYS = set(ModelConfig.model_fields)
_TRAIN_KEYS = set(TrainConfig.model_fields)


def build_model_config(preset_name: str = "tiny", **overrides) -> ModelConfig:
    """Create a ModelConfig from a preset plus explicit overrides"""
    if preset_name not in PRESETS:
        raise ConfigError(f"Unknown preset '{preset_name}' (available: {', '.join(sorted(PRESETS))})")
    values = {"preset_name": preset_name, **PRESETS[preset_name], **overrides}
    try:
        return ModelConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid model configuration: {e}") from e


def build_train_config(**overrides) -> TrainConfig:
    try:
        return TrainConfig(**overrides)
    except ValidationError as e:
        raise ConfigError(f"Invalid training configuration: {e}") from e


def read_config_file(path: str) -> Dict[str, str]:
    """Read a key=value config file (comments and blank lines allowed)"""
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    values = dotenv_values(path)
    unknown = sorted(set(values) - _MODEL_KEYS - _TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config keys in {path}: {', '.join(unknown)}")
    return {key: value for key, value in values.items() if value is not None}


def resolve_configs(config_path: Optional[str] = None,
                    overrides: Optional[Mapping[str, Any]] = None) -> Tuple[ModelConfig, TrainConfig]:
    """Preset -> config file -> CLI overrides, later sources win"""
    values: Dict[str, Any] = {}
    if config_path:
        values.update(read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    model_values = {k: v for k, v in values.items() if k in _MODEL_KEYS}
    train_values = {k: v for k, v in values.items() if k in _TRAIN_KEYS}
    preset = model_values.pop("preset_name", "tiny")
    return build_model_config(preset, **model_values), build_train_config(**train_values)
