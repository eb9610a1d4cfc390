"""
Trainer Module - optimization loop, checkpoints and multi-run averaging
"""
from .commands import register_trainer_commands
from .services import multi_run, train

__all__ = ['multi_run', 'register_trainer_commands', 'train']
