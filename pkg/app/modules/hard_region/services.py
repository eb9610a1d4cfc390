"""
Hard Region Services - hard/easy masks from annotation pairs and weight maps
"""
import numpy as np

from app.core.exceptions import ConfigError, InvalidWeightsError, ShapeMismatchError
from app.core.types import BinaryMask, CaseRecord, WeightMap
from app.core.validators import disagreement_labels


def compute_hard_mask(expert: BinaryMask, nonexpert: BinaryMask, dilate_px: int = 0) -> BinaryMask:
    """Pixels where the two annotations disagree (XOR), optionally dilated"""
    if expert.shape != nonexpert.shape:
        raise ShapeMismatchError(f"expert {expert.shape} and non-expert {nonexpert.shape} shapes differ")
    if dilate_px < 0:
        raise ConfigError(f"dilate_px must be >= 0, got {dilate_px}")
    hard = disagreement_labels(expert.labels, nonexpert.labels, dilate_px)
    return BinaryMask(labels=hard, spacing_mm=expert.spacing_mm)


def easy_mask(hard: BinaryMask) -> BinaryMask:
    """Complement of the hard region"""
    return BinaryMask(labels=(hard.labels == 0).astype(np.uint8), spacing_mm=hard.spacing_mm)


def hard_fraction(hard: BinaryMask) -> float:
    return float(np.count_nonzero(hard.labels)) / float(hard.labels.size)


def build_weight_map(hard: BinaryMask, w_hard: float = 12.0, w_easy: float = 1.0) -> WeightMap:
    """w_hard on hard pixels, w_easy elsewhere"""
    if not (np.isfinite(w_hard) and np.isfinite(w_easy)) or not w_hard >= w_easy >= 1.0:
        raise InvalidWeightsError(f"weights must satisfy w_hard >= w_easy >= 1, got ({w_hard}, {w_easy})")
    weights = np.where(hard.labels != 0, float(w_hard), float(w_easy))
    return WeightMap(weights=weights, w_hard=float(w_hard), w_easy=float(w_easy))


def derive_region_artifacts(record: CaseRecord, w_hard: float, w_easy: float, dilate_px: int = 0) -> CaseRecord:
    """Attach hard mask and weight map to a record.

    A cached hard mask is reused; without a non-expert annotation the whole
    image is easy. The weight map is always rebuilt from the hard mask.
    """
    hard = record.hard_mask
    if hard is None:
        if record.nonexpert_mask is not None:
            hard = compute_hard_mask(record.expert_mask, record.nonexpert_mask, dilate_px=dilate_px)
        else:
            hard = BinaryMask(labels=np.zeros(record.expert_mask.shape, dtype=np.uint8),
                              spacing_mm=record.expert_mask.spacing_mm)
    return record.with_updates(hard_mask=hard, weight_map=build_weight_map(hard, w_hard, w_easy))
