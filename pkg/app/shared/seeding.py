"""
Seed derivation and global RNG seeding
"""
import random
from typing import Sequence

import numpy as np
import torch


def derive_rng(*keys: int) -> np.random.Generator:
    """Independent generator for a tuple of integer keys (seed, case, slice, ...)"""
    return np.random.default_rng([int(k) for k in keys])


def derive_seed(*keys: int) -> int:
    """Stable 31-bit integer seed derived from a key tuple"""
    return int(derive_rng(*keys).integers(0, 2 ** 31 - 1))


def seed_everything(seed: int) -> None:
    """Seed python, numpy and torch and request deterministic kernels"""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    if torch.backends.cudnn.is_available():
        torch.backends.cudnn.benchmark = False
        torch.backends.cudnn.deterministic = True


def epoch_permutation(seed: int, epoch: int, size: int) -> Sequence[int]:
    """Data order for one epoch, fixed by (seed, epoch)"""
    return derive_rng(seed, epoch, 7919).permutation(size).tolist()
