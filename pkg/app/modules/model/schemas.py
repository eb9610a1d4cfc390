"""
Model Schemas - token sequences and model summaries
"""
from typing import Dict, NamedTuple, Tuple

import torch
from pydantic import BaseModel


class TokenSequence(NamedTuple):
    """Tokens (B, N, D) with the (h, w) grid they were cut from; h * w == N"""
    tokens: torch.Tensor
    grid_shape: Tuple[int, int]

    @property
    def num_tokens(self) -> int:
        return self.tokens.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.tokens.shape[2]


class ModelSummary(BaseModel):
    """Parameter bookkeeping of a built network"""
    preset_name: str
    stem_mode: str
    num_tokens: int
    parameter_count: int
    parameter_groups: Dict[str, int]
