"""
Brute-force reference implementations for the metric functions

Slow on purpose: plain loops over pixels and all boundary pairs.
"""
import math
from typing import List, Sequence, Tuple

import numpy as np

from app.core.exceptions import EmptyBoundaryError


def dice_oracle(g: np.ndarray, p: np.ndarray) -> float:
    inter = size_g = size_p = 0
    for r in range(g.shape[0]):
        for c in range(g.shape[1]):
            a, b = bool(g[r, c]), bool(p[r, c])
            size_g += a
            size_p += b
            inter += a and b
    if size_g + size_p == 0:
        return 1.0
    return 2.0 * inter / (size_g + size_p)


def boundary_oracle(mask: np.ndarray) -> List[Tuple[int, int]]:
    height, width = mask.shape
    points = []
    for r in range(height):
        for c in range(width):
            if not mask[r, c]:
                continue
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < height and 0 <= cc < width) or not mask[rr, cc]:
                    points.append((r, c))
                    break
    return points


def _directed(src: List[Tuple[int, int]], dst: List[Tuple[int, int]], spacing: Sequence[float]) -> List[float]:
    sr, sc = spacing
    return [min(math.sqrt(((r - rr) * sr) ** 2 + ((c - cc) * sc) ** 2) for rr, cc in dst) for r, c in src]


def _percentile(values: List[float], q: float) -> float:
    ordered = sorted(values)
    rank = (len(ordered) - 1) * q / 100.0
    lo = int(math.floor(rank))
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (ordered[hi] - ordered[lo]) * (rank - lo)


def hd95_oracle(g: np.ndarray, p: np.ndarray, spacing: Sequence[float] = (1.0, 1.0), pooled: bool = False) -> float:
    """All-pairs boundary distances, directed 95th percentiles"""
    bg, bp = boundary_oracle(g), boundary_oracle(p)
    if not bg or not bp:
        raise EmptyBoundaryError("empty boundary")
    forward, backward = _directed(bg, bp, spacing), _directed(bp, bg, spacing)
    if pooled:
        return _percentile(forward + backward, 95.0)
    return max(_percentile(forward, 95.0), _percentile(backward, 95.0))


def hausdorff_oracle(g: np.ndarray, p: np.ndarray, spacing: Sequence[float] = (1.0, 1.0)) -> float:
    bg, bp = boundary_oracle(g), boundary_oracle(p)
    if not bg or not bp:
        raise EmptyBoundaryError("empty boundary")
    return max(max(_directed(bg, bp, spacing)), max(_directed(bp, bg, spacing)))
