"""
Metric Services - Dice and Hausdorff distances with physical pixel spacing

Boundaries use 4-connectivity with the image edge counted as background.
Directed distances come from a Euclidean distance transform of the other
boundary, which equals the exhaustive nearest-boundary-pixel search.
"""
import logging
from typing import Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy import ndimage

from app.core.config import DEFAULT_SPACING_MM
from app.core.exceptions import EmptyBoundaryError, ShapeMismatchError
from app.core.types import BinaryMask, ProbabilityMap

logger = logging.getLogger(__name__)

MaskLike = Union[BinaryMask, np.ndarray]

DEFAULT_THRESHOLD = 0.5
HD_PERCENTILE = 95.0


def _labels(mask: MaskLike) -> np.ndarray:
    labels = mask.labels if isinstance(mask, BinaryMask) else np.asarray(mask)
    return labels.astype(bool)


def _pair(G: MaskLike, P: MaskLike) -> Tuple[np.ndarray, np.ndarray]:
    g, p = _labels(G), _labels(P)
    if g.shape != p.shape:
        raise ShapeMismatchError(f"masks differ in shape: {g.shape} vs {p.shape}")
    return g, p


def _spacing(spacing_mm: Optional[Sequence[float]], *masks: MaskLike) -> Tuple[float, float]:
    if spacing_mm is not None:
        return float(spacing_mm[0]), float(spacing_mm[1])
    for mask in masks:
        if isinstance(mask, BinaryMask):
            return tuple(float(s) for s in mask.spacing_mm)
    return DEFAULT_SPACING_MM


def binarize(probs: Union[ProbabilityMap, np.ndarray], threshold: float = DEFAULT_THRESHOLD,
             spacing_mm: Sequence[float] = DEFAULT_SPACING_MM) -> BinaryMask:
    """Foreground where p >= threshold"""
    values = probs.probs if isinstance(probs, ProbabilityMap) else np.asarray(probs)
    return BinaryMask(labels=(values >= threshold).astype(np.uint8), spacing_mm=tuple(spacing_mm))


def dice(G: MaskLike, P: MaskLike) -> float:
    """2|G∩P| / (|G|+|P|); two empty masks score 1.0"""
    g, p = _pair(G, P)
    total = int(np.count_nonzero(g)) + int(np.count_nonzero(p))
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(g & p)) / total


def region_dice(G: MaskLike, P: MaskLike, region: MaskLike) -> float:
    """Dice with both counts restricted to the region's pixels"""
    g, p = _pair(G, P)
    r = _labels(region)
    if r.shape != g.shape:
        raise ShapeMismatchError(f"region {r.shape} does not match masks {g.shape}")
    return dice(g & r, p & r)


def boundary_array(mask: MaskLike) -> np.ndarray:
    """Boolean map of foreground pixels with a background (or off-image) 4-neighbour"""
    m = _labels(mask)
    padded = np.pad(m, 1, mode="constant", constant_values=False)
    interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return m & ~interior


def extract_boundary(mask: MaskLike) -> Set[Tuple[int, int]]:
    return {(int(r), int(c)) for r, c in np.argwhere(boundary_array(mask))}


def directed_distances(source: MaskLike, target: MaskLike, spacing_mm: Optional[Sequence[float]] = None) -> np.ndarray:
    """For every boundary pixel of source, the mm distance to the nearest boundary pixel of target"""
    spacing = _spacing(spacing_mm, source, target)
    source_edge, target_edge = boundary_array(source), boundary_array(target)
    if not source_edge.any() or not target_edge.any():
        raise EmptyBoundaryError("empty boundary: both masks must have foreground pixels")
    field = ndimage.distance_transform_edt(~target_edge, sampling=spacing)
    return field[source_edge]


def hd95(G: MaskLike, P: MaskLike, spacing_mm: Optional[Sequence[float]] = None,
         pooled: bool = False, percentile: float = HD_PERCENTILE) -> float:
    """95th percentile Hausdorff distance in millimetres.

    Default: max of the two directed percentiles. pooled=True takes the
    percentile of both directed distance lists concatenated instead.
    Percentiles interpolate linearly on the sorted list.
    """
    _pair(G, P)
    forward = directed_distances(G, P, spacing_mm)
    backward = directed_distances(P, G, spacing_mm)
    if pooled:
        return float(np.percentile(np.concatenate([forward, backward]), percentile))
    return float(max(np.percentile(forward, percentile), np.percentile(backward, percentile)))


def hausdorff(G: MaskLike, P: MaskLike, spacing_mm: Optional[Sequence[float]] = None) -> float:
    """Exact (100th percentile) Hausdorff distance between boundaries"""
    _pair(G, P)
    return float(max(directed_distances(G, P, spacing_mm).max(), directed_distances(P, G, spacing_mm).max()))


def safe_hd95(G: MaskLike, P: MaskLike, spacing_mm: Optional[Sequence[float]] = None, pooled: bool = False) -> float:
    """hd95 that returns NaN instead of raising when either mask is empty"""
    try:
        return hd95(G, P, spacing_mm, pooled=pooled)
    except EmptyBoundaryError:
        return float("nan")
