"""
Hard Region Module
Hard/easy regions from expert vs non-expert disagreement and AG-BCE weight maps
"""

from .commands import register_hard_region_commands

__all__ = ['register_hard_region_commands']
