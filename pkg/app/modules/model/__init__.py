"""
Model Module - hybrid conv-transformer segmentation network
"""
from .commands import register_model_commands
from .network import MicroSegNet
from .repository import load_checkpoint, make_checkpoint, save_checkpoint
from .schemas import TokenSequence
from .services import (build_model, conv_stem, count_parameters, decode, forward, parameter_count_from_config,
                       patch_embed, transformer_encoder)

__all__ = [
    'MicroSegNet',
    'TokenSequence',
    'build_model',
    'conv_stem',
    'count_parameters',
    'decode',
    'forward',
    'load_checkpoint',
    'make_checkpoint',
    'parameter_count_from_config',
    'patch_embed',
    'register_model_commands',
    'save_checkpoint',
    'transformer_encoder',
]
