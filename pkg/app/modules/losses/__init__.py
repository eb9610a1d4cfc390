"""
Loss Module
BCE, AG-BCE and the deep-supervised training loss
"""

from .services import SCALE_COEFFICIENTS, ag_bce, bce, training_loss

__all__ = ['SCALE_COEFFICIENTS', 'ag_bce', 'bce', 'training_loss']
