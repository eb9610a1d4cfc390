"""
Synthetic Data Module
Micro-ultrasound-like case generator, simulated non-expert annotator,
preprocessing and the on-disk dataset format
"""

from .commands import register_synthdata_commands

__all__ = ['register_synthdata_commands']
