"""
Trainer Schemas - training log records
"""
from typing import List, Optional

from pydantic import BaseModel


class StepRecord(BaseModel):
    step: int
    epoch: int
    loss: float
    loss_p1: float
    loss_p2: Optional[float] = None
    loss_p3: Optional[float] = None
    loss_p4: Optional[float] = None
    lr: float


class EpochRecord(BaseModel):
    epoch: int
    mean_loss: float
    val_dice: Optional[float] = None


class TrainingLog(BaseModel):
    """Per-step losses and per-epoch summaries of one training run"""
    seed: int
    deep_supervision: bool
    steps: List[StepRecord] = []
    epochs: List[EpochRecord] = []

    @property
    def loss_curve(self) -> List[float]:
        return [s.loss for s in self.steps]

    @property
    def epoch_losses(self) -> List[float]:
        return [e.mean_loss for e in self.epochs]
