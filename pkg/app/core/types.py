"""
Domain types shared by all modules

All types are immutable once built: pydantic models are frozen and the
wrapped numpy arrays are copied and flagged read-only. Constructors do not
enforce the domain invariants; validate_case() reports violations as data.
"""
from typing import NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .config import DEFAULT_SPACING_MM


def _frozen_array(value, dtype=None) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class _ArrayModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Image2D(_ArrayModel):
    """Single-channel grayscale image with pixel spacing metadata"""
    pixels: np.ndarray
    spacing_mm: Tuple[float, float] = DEFAULT_SPACING_MM
    case_id: str = ""
    slice_index: int = 0

    @field_validator("pixels", mode="before")
    @classmethod
    def _freeze(cls, value):
        return _frozen_array(value, dtype=np.float32)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.pixels.shape)


class BinaryMask(_ArrayModel):
    """Per-pixel {0,1} label map"""
    labels: np.ndarray
    spacing_mm: Tuple[float, float] = DEFAULT_SPACING_MM

    @field_validator("labels", mode="before")
    @classmethod
    def _freeze(cls, value):
        array = np.asarray(value)
        if array.dtype == bool:
            array = array.astype(np.uint8)
        return _frozen_array(array)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.labels.shape)

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.labels))

    def as_bool(self) -> np.ndarray:
        return self.labels.astype(bool)


class ProbabilityMap(_ArrayModel):
    """Per-pixel foreground probabilities"""
    probs: np.ndarray

    @field_validator("probs", mode="before")
    @classmethod
    def _freeze(cls, value):
        return _frozen_array(value, dtype=np.float64)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.probs.shape)


class WeightMap(_ArrayModel):
    """Per-pixel loss weights, w_hard on hard pixels and w_easy elsewhere"""
    weights: np.ndarray
    w_hard: float = 12.0
    w_easy: float = 1.0

    @field_validator("weights", mode="before")
    @classmethod
    def _freeze(cls, value):
        return _frozen_array(value, dtype=np.float64)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.weights.shape)


class MultiScalePrediction(NamedTuple):
    """Probability maps at full, 1/2, 1/4 and 1/8 resolution.

    Holds torch tensors shaped (B, 1, S, S) when produced by the network.
    p2..p4 are None when deep supervision is disabled.
    """
    p1: "object"
    p2: Optional["object"] = None
    p3: Optional["object"] = None
    p4: Optional["object"] = None

    @property
    def has_deep_supervision(self) -> bool:
        return self.p2 is not None and self.p3 is not None and self.p4 is not None


class CaseRecord(_ArrayModel):
    """One patient slice: image, annotation pair and derived artifacts"""
    image: Image2D
    expert_mask: BinaryMask
    nonexpert_mask: Optional[BinaryMask] = None
    hard_mask: Optional[BinaryMask] = None
    weight_map: Optional[WeightMap] = None
    case_id: str
    slice_index: int = 0
    split: Optional[str] = None

    @property
    def key(self) -> str:
        return f"{self.case_id}/slice_{self.slice_index}"

    def with_updates(self, **changes) -> "CaseRecord":
        """Return a copy with some fields replaced"""
        return self.model_copy(update=changes)
