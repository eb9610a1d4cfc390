"""
Model Repository - checkpoint persistence
"""
import logging
import os
from typing import Any, Dict, Optional, Tuple, Union

import torch

from app.core.config import CHECKPOINT_FORMAT, ModelConfig, TrainConfig
from app.core.exceptions import CheckpointError
from .network import MicroSegNet

logger = logging.getLogger(__name__)

Checkpoint = Dict[str, Any]


def make_checkpoint(model: MicroSegNet, train_config: TrainConfig,
                    metadata: Optional[Dict[str, Any]] = None) -> Checkpoint:
    """In-memory checkpoint: configs, CPU state dict and run metadata"""
    return {
        "format": CHECKPOINT_FORMAT,
        "model_config": model.config.model_dump(mode="json"),
        "train_config": train_config.model_dump(mode="json"),
        "state_dict": {k: v.detach().cpu().clone() for k, v in model.state_dict().items()},
        "metadata": dict(metadata or {}),
    }


def save_checkpoint(path: str, checkpoint: Checkpoint) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    torch.save(checkpoint, path)
    logger.info(f"[OK] Saved checkpoint to {path}")
    return path


def read_checkpoint(source: Union[str, Checkpoint]) -> Checkpoint:
    """Load a checkpoint from disk (or pass an in-memory one through) and check its format"""
    if isinstance(source, dict):
        checkpoint = source
    else:
        if not os.path.isfile(source):
            raise CheckpointError(f"checkpoint not found: {source}")
        try:
            checkpoint = torch.load(source, map_location="cpu")
        except Exception as e:
            raise CheckpointError(f"unreadable checkpoint {source}: {e}") from e
    if not isinstance(checkpoint, dict) or checkpoint.get("format") != CHECKPOINT_FORMAT:
        found = checkpoint.get("format") if isinstance(checkpoint, dict) else type(checkpoint).__name__
        raise CheckpointError(f"unsupported checkpoint format {found!r}, expected {CHECKPOINT_FORMAT!r}")
    for key in ("model_config", "train_config", "state_dict"):
        if key not in checkpoint:
            raise CheckpointError(f"checkpoint is missing '{key}'")
    return checkpoint


def load_checkpoint(source: Union[str, Checkpoint], expected: Optional[ModelConfig] = None,
                    device: str = "cpu") -> Tuple[MicroSegNet, TrainConfig, Checkpoint]:
    """Rebuild the network a checkpoint was saved from"""
    checkpoint = read_checkpoint(source)
    try:
        model_config = ModelConfig(**checkpoint["model_config"])
        train_config = TrainConfig(**checkpoint["train_config"])
    except Exception as e:
        raise CheckpointError(f"checkpoint carries an invalid configuration: {e}") from e
    if expected is not None and expected != model_config:
        raise CheckpointError(f"checkpoint model config {model_config.model_dump()} "
                              f"differs from expected {expected.model_dump()}")

    model = MicroSegNet(model_config, deep_supervision=train_config.deep_supervision)
    try:
        model.load_state_dict(checkpoint["state_dict"], strict=True)
    except RuntimeError as e:
        raise CheckpointError(f"state dict does not fit the configured network: {e}") from e
    model.to(device)
    model.eval()
    return model, train_config, checkpoint
