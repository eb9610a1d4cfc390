"""
Core utilities for the application
Contains: Config, Domain types, Validators, Exceptions
"""

from .config import ModelConfig, TrainConfig, build_model_config, build_train_config, resolve_configs
from .types import BinaryMask, CaseRecord, Image2D, MultiScalePrediction, ProbabilityMap, WeightMap
from .validators import validate_case

__all__ = [
    'ModelConfig',
    'TrainConfig',
    'build_model_config',
    'build_train_config',
    'resolve_configs',
    'BinaryMask',
    'CaseRecord',
    'Image2D',
    'MultiScalePrediction',
    'ProbabilityMap',
    'WeightMap',
    'validate_case',
]
