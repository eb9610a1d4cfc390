"""
MicroSegNet network: convolutional stem, patch embedding, transformer
encoder, UNet decoder and four sigmoid supervision heads
"""
import math
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange
from einops.layers.torch import Rearrange

from app.core.config import PROB_EPSILON, ModelConfig
from app.core.exceptions import ShapeMismatchError
from app.core.types import MultiScalePrediction
from .schemas import TokenSequence


def _groups(channels: int) -> int:
    return math.gcd(8, channels)


class ConvBlock(nn.Module):
    """Two 3x3 convolutions with GroupNorm and ReLU; the first may stride"""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False),
            nn.GroupNorm(_groups(out_channels), out_channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False),
            nn.GroupNorm(_groups(out_channels), out_channels),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.block(x)


class ConvStem(nn.Module):
    """Three stride-2 stages; returns the 1/8 feature map and skips at 1/2, 1/4, 1/8"""

    def __init__(self, channels: Sequence[int], in_channels: int = 1):
        super().__init__()
        c1, c2, c3 = channels
        self.stages = nn.ModuleList([
            ConvBlock(in_channels, c1, stride=2),
            ConvBlock(c1, c2, stride=2),
            ConvBlock(c2, c3, stride=2),
        ])

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        height, width = x.shape[-2:]
        if height % 16 or width % 16:
            raise ShapeMismatchError(f"input size {height}x{width} is not divisible by 16")
        skips = []
        for stage in self.stages:
            x = stage(x)
            skips.append(x)
        return x, skips


class PatchEmbedding(nn.Module):
    """Flatten P x P patches, project to D and add the learned position table"""

    def __init__(self, in_channels: int, patch_size: int, embed_dim: int, grid_size: int):
        super().__init__()
        self.patch_size = patch_size
        self.grid_size = grid_size
        self.to_patches = Rearrange("b c (h p1) (w p2) -> b (h w) (p1 p2 c)", p1=patch_size, p2=patch_size)
        self.projection = nn.Linear(patch_size * patch_size * in_channels, embed_dim)
        self.position = nn.Parameter(torch.zeros(1, grid_size * grid_size, embed_dim))

    def position_table(self, grid_h: int, grid_w: int) -> torch.Tensor:
        """Position table for a grid, bilinearly resized when it differs from the configured grid"""
        if (grid_h, grid_w) == (self.grid_size, self.grid_size):
            return self.position
        table = rearrange(self.position, "1 (h w) d -> 1 d h w", h=self.grid_size)
        table = F.interpolate(table, size=(grid_h, grid_w), mode="bilinear", align_corners=False)
        return rearrange(table, "1 d h w -> 1 (h w) d")

    def forward(self, features: torch.Tensor) -> TokenSequence:
        height, width = features.shape[-2:]
        if height % self.patch_size or width % self.patch_size:
            raise ShapeMismatchError(f"feature map {height}x{width} not divisible by patch size {self.patch_size}")
        grid = (height // self.patch_size, width // self.patch_size)
        tokens = self.projection(self.to_patches(features))
        return TokenSequence(tokens + self.position_table(*grid), grid)


class SelfAttention(nn.Module):
    """Multi-head self-attention over the token axis"""

    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.to_qkv = nn.Linear(dim, dim * 3)
        self.dropout = nn.Dropout(dropout)
        self.to_out = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = (rearrange(t, "b n (h d) -> b h n d", h=self.heads) for t in self.to_qkv(x).chunk(3, dim=-1))
        attn = self.dropout(torch.softmax(torch.matmul(q, k.transpose(-1, -2)) * self.scale, dim=-1))
        out = rearrange(torch.matmul(attn, v), "b h n d -> b n (h d)")
        return self.to_out(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, hidden_dim: int, dropout: float = 0.0):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden_dim)
        self.gelu = nn.GELU()
        self.fc2 = nn.Linear(hidden_dim, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.dropout(self.fc2(self.dropout(self.gelu(self.fc1(x)))))


class EncoderLayer(nn.Module):
    """z' = MHSA(LN(z)) + z ; z = FFN(LN(z')) + z'"""

    def __init__(self, dim: int, heads: int, hidden_dim: int, dropout: float = 0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attention = SelfAttention(dim, heads, dropout)
        self.norm2 = nn.LayerNorm(dim)
        self.ffn = FeedForward(dim, hidden_dim, dropout)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        z = self.attention(self.norm1(z)) + z
        return self.ffn(self.norm2(z)) + z


class TransformerEncoder(nn.Module):
    def __init__(self, dim: int, depth: int, heads: int, hidden_dim: int, dropout: float = 0.0):
        super().__init__()
        self.layers = nn.ModuleList([EncoderLayer(dim, heads, hidden_dim, dropout) for _ in range(depth)])

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            z = layer(z)
        return z


class DecoderBlock(nn.Module):
    """2x bilinear upsampling, optional skip concatenation, ConvBlock"""

    def __init__(self, in_channels: int, skip_channels: int, out_channels: int):
        super().__init__()
        self.conv = ConvBlock(in_channels + skip_channels, out_channels)

    def forward(self, x: torch.Tensor, skip: Optional[torch.Tensor] = None) -> torch.Tensor:
        x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        if skip is not None:
            if skip.shape[-2:] != x.shape[-2:]:
                raise ShapeMismatchError(f"skip {tuple(skip.shape[-2:])} does not match decoder stage {tuple(x.shape[-2:])}")
            x = torch.cat([x, skip], dim=1)
        return self.conv(x)


class SegmentationHead(nn.Module):
    """1x1 convolution + sigmoid, clamped into (0, 1)"""

    def __init__(self, in_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, 1, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.conv(x)).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)


class UNetDecoder(nn.Module):
    """Cascaded upsampling 1/16 -> 1/8 -> 1/4 -> 1/2 -> 1 with a head per stage"""

    def __init__(self, embed_dim: int, channels: Sequence[int]):
        super().__init__()
        c1, c2, c3 = channels
        c0 = max(c1 // 2, 2)
        self.norm = nn.LayerNorm(embed_dim)
        self.neck = nn.Sequential(
            nn.Conv2d(embed_dim, c3, 3, padding=1, bias=False),
            nn.GroupNorm(_groups(c3), c3),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.ModuleList([
            DecoderBlock(c3, c3, c3),
            DecoderBlock(c3, c2, c2),
            DecoderBlock(c2, c1, c1),
            DecoderBlock(c1, 0, c0),
        ])
        # heads[0] is full resolution (P1) ... heads[3] is 1/8 (P4)
        self.heads = nn.ModuleList([SegmentationHead(c) for c in (c0, c1, c2, c3)])

    def forward(self, tokens: TokenSequence, skips: Sequence[torch.Tensor],
                deep_supervision: bool = True) -> MultiScalePrediction:
        if len(skips) != 3:
            raise ShapeMismatchError(f"decoder expects 3 skips, got {len(skips)}")
        grid_h, grid_w = tokens.grid_shape
        x = rearrange(self.norm(tokens.tokens), "b (h w) d -> b d h w", h=grid_h, w=grid_w)
        x = self.neck(x)

        outputs = {}
        for stage, (block, skip, name) in enumerate(zip(self.blocks, (skips[2], skips[1], skips[0], None),
                                                        ("p4", "p3", "p2", "p1"))):
            x = block(x, skip)
            if name == "p1" or deep_supervision:
                outputs[name] = self.heads[3 - stage](x)
        return MultiScalePrediction(**outputs)


class MicroSegNet(nn.Module):
    """Hybrid conv-transformer encoder-decoder with deep supervision heads"""

    def __init__(self, config: ModelConfig, deep_supervision: bool = True):
        super().__init__()
        self.config = config
        self.deep_supervision = deep_supervision
        self.stem = ConvStem(config.stem_channels)
        if config.stem_mode == "hybrid":
            self.patch_embed = PatchEmbedding(config.stem_channels[2], config.feature_patch_size,
                                              config.embed_dim, config.grid_size)
        else:
            self.patch_embed = PatchEmbedding(1, config.patch_size, config.embed_dim, config.grid_size)
        self.encoder = TransformerEncoder(config.embed_dim, config.num_layers, config.num_heads,
                                          int(config.embed_dim * config.mlp_ratio), config.dropout)
        self.decoder = UNetDecoder(config.embed_dim, config.stem_channels)
        self._init_parameters()

    @staticmethod
    def _init_module(module: nn.Module) -> None:
        if isinstance(module, nn.Linear):
            nn.init.trunc_normal_(module.weight, mean=0.0, std=0.02)
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(module.weight, mode="fan_out", nonlinearity="relu")
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, (nn.LayerNorm, nn.GroupNorm)):
            nn.init.ones_(module.weight)
            nn.init.zeros_(module.bias)

    def _init_parameters(self) -> None:
        self.apply(self._init_module)
        nn.init.trunc_normal_(self.patch_embed.position, mean=0.0, std=0.02)
        for head in self.decoder.heads:
            nn.init.trunc_normal_(head.conv.weight, mean=0.0, std=0.02)
            nn.init.zeros_(head.conv.bias)

    def forward(self, x: torch.Tensor) -> MultiScalePrediction:
        if x.dim() == 3:
            x = x.unsqueeze(1)
        deep, skips = self.stem(x)
        tokens = self.patch_embed(deep if self.config.stem_mode == "hybrid" else x)
        encoded = TokenSequence(self.encoder(tokens.tokens), tokens.grid_shape)
        return self.decoder(encoded, skips, self.deep_supervision)
