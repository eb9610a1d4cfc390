"""
Metrics Module - Dice, HD95 and reference oracles
"""
from .services import binarize, dice, extract_boundary, hausdorff, hd95, region_dice

__all__ = ['binarize', 'dice', 'extract_boundary', 'hausdorff', 'hd95', 'region_dice']
