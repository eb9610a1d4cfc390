"""
Validation utilities for case records, masks and weight maps
"""
from typing import List, Optional

import cv2
import numpy as np

from .types import BinaryMask, CaseRecord, WeightMap

MIN_SIDE = 8


def _check_spacing(field: str, spacing) -> List[str]:
    if len(spacing) != 2 or not all(np.isfinite(s) and s > 0 for s in spacing):
        return [f"{field}: spacing_mm must be two strictly positive values, got {tuple(spacing)}"]
    return []


def _check_mask(field: str, mask: BinaryMask, image_shape) -> List[str]:
    violations = _check_spacing(field, mask.spacing_mm)
    labels = mask.labels
    if labels.ndim != 2:
        return violations + [f"{field}: labels must be 2-D, got shape {labels.shape}"]
    if tuple(labels.shape) != tuple(image_shape):
        violations.append(f"{field}: shape mismatch {tuple(labels.shape)} vs image {tuple(image_shape)}")
    bad = np.argwhere((labels != 0) & (labels != 1))
    if len(bad):
        r, c = (int(v) for v in bad[0])
        violations.append(f"{field}: labels not binary at ({r},{c}) ({len(bad)} pixels)")
    return violations


def disagreement_labels(expert: np.ndarray, nonexpert: np.ndarray, dilate_px: int = 0) -> np.ndarray:
    """XOR of two label maps as uint8, dilated by an elliptic kernel of radius dilate_px"""
    hard = np.logical_xor(expert != 0, nonexpert != 0).astype(np.uint8)
    if dilate_px > 0:
        kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (2 * dilate_px + 1, 2 * dilate_px + 1))
        hard = cv2.dilate(hard, kernel)
    return hard


def is_binary(labels: np.ndarray) -> bool:
    """True when every element is exactly 0 or 1"""
    return bool(np.all((labels == 0) | (labels == 1)))


def validate_weight_map(weight_map: WeightMap, hard: Optional[BinaryMask] = None) -> List[str]:
    """Check the two-valued weight map postconditions"""
    violations = []
    weights = weight_map.weights
    if np.any(~np.isfinite(weights)) or np.any(weights < 1.0):
        violations.append("weight_map: every weight must be finite and >= 1")
    values = set(np.unique(weights).tolist())
    if not values <= {weight_map.w_hard, weight_map.w_easy}:
        violations.append(f"weight_map: values {sorted(values)} not in {{w_easy, w_hard}}")
    if hard is not None and hard.labels.shape == weights.shape:
        expected = np.where(hard.labels == 1, weight_map.w_hard, weight_map.w_easy)
        if not np.array_equal(expected, weights):
            violations.append("weight_map: does not match hard_mask")
    return violations


def validate_case(record: CaseRecord, input_size: Optional[int] = None, dilate_px: int = 0) -> List[str]:
    """Return the list of violated invariants (empty when the record is well formed).

    When input_size is given the image is also expected to be preprocessed:
    square at input_size with intensities in [0, 1]. A hard mask must equal the
    expert/non-expert XOR dilated by dilate_px.
    """
    violations: List[str] = []
    image = record.image
    pixels = image.pixels

    if not record.case_id:
        violations.append("case_id: must be a non-empty string")
    if image.case_id and image.case_id != record.case_id:
        violations.append(f"image: case_id '{image.case_id}' differs from record '{record.case_id}'")

    if pixels.ndim != 2:
        violations.append(f"image: pixels must be 2-D, got shape {pixels.shape}")
        return violations
    height, width = pixels.shape
    if height < MIN_SIDE or width < MIN_SIDE:
        violations.append(f"image: size {height}x{width} below minimum {MIN_SIDE}x{MIN_SIDE}")
    violations += _check_spacing("image", image.spacing_mm)
    if not np.all(np.isfinite(pixels)):
        violations.append("image: non-finite intensities")
    if input_size is not None:
        if (height, width) != (input_size, input_size):
            violations.append(f"image: size {height}x{width} differs from input_size {input_size}")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            violations.append("image: intensities outside [0, 1] after preprocessing")

    violations += _check_mask("expert_mask", record.expert_mask, pixels.shape)
    if record.nonexpert_mask is not None:
        violations += _check_mask("nonexpert_mask", record.nonexpert_mask, pixels.shape)

    if record.hard_mask is not None:
        hard_violations = _check_mask("hard_mask", record.hard_mask, pixels.shape)
        violations += hard_violations
        if not hard_violations and record.nonexpert_mask is not None and \
                record.nonexpert_mask.shape == record.expert_mask.shape == record.hard_mask.shape:
            expected = disagreement_labels(record.expert_mask.labels, record.nonexpert_mask.labels, dilate_px) == 1
            hard = record.hard_mask.labels == 1
            if np.any(expected & ~hard):
                violations.append("hard_mask: does not cover the expert/non-expert disagreement")
            extra = int(np.count_nonzero(hard & ~expected))
            if extra:
                violations.append(f"hard_mask: {extra} pixels outside the disagreement (dilate_px={dilate_px})")

    if record.weight_map is not None:
        if record.weight_map.shape != tuple(pixels.shape):
            violations.append(f"weight_map: shape mismatch {record.weight_map.shape} vs image {tuple(pixels.shape)}")
        else:
            violations += validate_weight_map(record.weight_map, record.hard_mask)

    return violations
