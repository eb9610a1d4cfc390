"""
Model Services - build the network and run its stages

Each stage (stem, patch embedding, encoder, decoder) is exposed on its
own so the intermediate shapes can be checked in isolation.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from app.core.config import ModelConfig
from app.core.exceptions import ShapeMismatchError
from app.core.types import Image2D, MultiScalePrediction
from .network import MicroSegNet
from .schemas import ModelSummary, TokenSequence

logger = logging.getLogger(__name__)

ImageBatch = Union[torch.Tensor, np.ndarray, Image2D, Sequence[Image2D]]


def build_model(config: ModelConfig, deep_supervision: bool = True, seed: Optional[int] = None) -> MicroSegNet:
    """Instantiate the network; parameter shapes depend on config only"""
    if seed is not None:
        torch.manual_seed(seed)
    model = MicroSegNet(config, deep_supervision=deep_supervision)
    logger.info(f"[OK] Built {config.preset_name} model ({config.stem_mode} stem, "
                f"{count_parameters(model):,} parameters, deep_supervision={deep_supervision})")
    return model


def as_batch(images: ImageBatch, device: Optional[torch.device] = None) -> torch.Tensor:
    """Stack images into a float32 (B, 1, H, W) tensor"""
    if isinstance(images, Image2D):
        images = [images]
    if isinstance(images, (list, tuple)):
        images = np.stack([im.pixels if isinstance(im, Image2D) else np.asarray(im) for im in images])
    batch = images if isinstance(images, torch.Tensor) else torch.as_tensor(np.asarray(images))
    batch = batch.to(torch.float32)
    if batch.dim() == 2:
        batch = batch[None, None]
    elif batch.dim() == 3:
        batch = batch[:, None]
    if batch.dim() != 4 or batch.shape[1] != 1:
        raise ShapeMismatchError(f"expected single-channel images, got shape {tuple(batch.shape)}")
    return batch.to(device) if device is not None else batch


def conv_stem(model: MicroSegNet, images: ImageBatch) -> Tuple[torch.Tensor, List[torch.Tensor]]:
    """1/8 feature map plus skips at 1/2, 1/4, 1/8"""
    return model.stem(as_batch(images, _device_of(model)))


def patch_embed(model: MicroSegNet, features: torch.Tensor) -> TokenSequence:
    """z0 = [x_p^1 E; ...; x_p^N E] + E_pos"""
    return model.patch_embed(features)


def transformer_encoder(model: MicroSegNet, tokens: Union[TokenSequence, torch.Tensor]) -> TokenSequence:
    """Run the L encoder layers; the token shape is preserved"""
    if isinstance(tokens, TokenSequence):
        return TokenSequence(model.encoder(tokens.tokens), tokens.grid_shape)
    side = int(round(tokens.shape[1] ** 0.5))
    return TokenSequence(model.encoder(tokens), (side, tokens.shape[1] // max(side, 1)))


def decode(model: MicroSegNet, tokens: TokenSequence, skips: Sequence[torch.Tensor],
           deep_supervision: Optional[bool] = None) -> MultiScalePrediction:
    """Reshape tokens to a grid and upsample back to full resolution"""
    if deep_supervision is None:
        deep_supervision = model.deep_supervision
    return model.decoder(tokens, skips, deep_supervision)


def forward(model: MicroSegNet, images: ImageBatch) -> MultiScalePrediction:
    """Full forward pass; p2..p4 are None when deep supervision is off"""
    return model(as_batch(images, _device_of(model)))


@torch.no_grad()
def predict_probabilities(model: MicroSegNet, images: ImageBatch, batch_size: int = 8) -> np.ndarray:
    """Full-resolution P1 probabilities (B, H, W) in eval mode"""
    was_training = model.training
    model.eval()
    batch = as_batch(images)
    chunks = []
    for start in range(0, batch.shape[0], batch_size):
        chunk = batch[start:start + batch_size].to(_device_of(model))
        chunks.append(model(chunk).p1[:, 0].double().cpu().numpy())
    model.train(was_training)
    return np.concatenate(chunks, axis=0) if chunks else np.zeros((0,) + tuple(batch.shape[-2:]))


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def _conv_block(in_channels: int, out_channels: int) -> int:
    return 9 * in_channels * out_channels + 2 * out_channels + 9 * out_channels ** 2 + 2 * out_channels


def _linear(in_features: int, out_features: int) -> int:
    return in_features * out_features + out_features


def parameter_groups_from_config(config: ModelConfig) -> Dict[str, int]:
    """Closed-form parameter count per network part"""
    c1, c2, c3 = config.stem_channels
    c0 = max(c1 // 2, 2)
    d = config.embed_dim
    hidden = int(d * config.mlp_ratio)

    stem = _conv_block(1, c1) + _conv_block(c1, c2) + _conv_block(c2, c3)
    if config.stem_mode == "hybrid":
        embed = _linear(config.feature_patch_size ** 2 * c3, d)
    else:
        embed = _linear(config.patch_size ** 2, d)
    embed += config.num_tokens * d
    layer = 2 * d + _linear(d, 3 * d) + _linear(d, d) + 2 * d + _linear(d, hidden) + _linear(hidden, d)
    decoder = (2 * d + 9 * d * c3 + 2 * c3
               + _conv_block(2 * c3, c3) + _conv_block(c3 + c2, c2)
               + _conv_block(c2 + c1, c1) + _conv_block(c1, c0))
    heads = sum(c + 1 for c in (c0, c1, c2, c3))
    return {
        "stem": stem,
        "patch_embed": embed,
        "encoder": config.num_layers * layer,
        "decoder": decoder,
        "heads": heads,
    }


def parameter_count_from_config(config: ModelConfig) -> int:
    return sum(parameter_groups_from_config(config).values())


def summarize(model: MicroSegNet) -> ModelSummary:
    config = model.config
    return ModelSummary(
        preset_name=config.preset_name,
        stem_mode=config.stem_mode,
        num_tokens=config.num_tokens,
        parameter_count=count_parameters(model),
        parameter_groups=parameter_groups_from_config(config),
    )


def _device_of(model: nn.Module) -> torch.device:
    return next(model.parameters()).device
