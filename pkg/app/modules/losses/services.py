"""
Loss Services - BCE, annotation-guided BCE and the multi-scale training loss

All reductions run in float64 over a fixed (row-major) order, so
ag_bce(P, Y, 1) and bce(P, Y) agree bit for bit.
"""
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from app.core.config import PROB_EPSILON
from app.core.exceptions import InvalidWeightsError, ShapeMismatchError
from app.core.types import BinaryMask, MultiScalePrediction, ProbabilityMap, WeightMap
from app.modules.synthdata.services import downsample_mask

ArrayLike = Union[torch.Tensor, np.ndarray, ProbabilityMap, BinaryMask, WeightMap]

EPSILON = PROB_EPSILON

# coefficient per prediction head; p1 is full resolution, p4 is 1/8
SCALE_COEFFICIENTS: Dict[str, float] = {"p1": 1.0, "p2": 0.5, "p3": 0.25, "p4": 0.125}
SCALE_FACTORS: Dict[str, int] = {"p1": 1, "p2": 2, "p3": 4, "p4": 8}


def _to_tensor(value: ArrayLike) -> torch.Tensor:
    if isinstance(value, ProbabilityMap):
        value = value.probs
    elif isinstance(value, BinaryMask):
        value = value.labels
    elif isinstance(value, WeightMap):
        value = value.weights
    if isinstance(value, torch.Tensor):
        return value.to(torch.float64)
    return torch.as_tensor(np.asarray(value), dtype=torch.float64)


def _pixel_log_likelihood(p: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    p = p.clamp(EPSILON, 1.0 - EPSILON)
    return y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p)


def _reduce(terms: torch.Tensor) -> torch.Tensor:
    return -(terms.reshape(-1).sum() / terms.numel())


def _check_shapes(name: str, p: torch.Tensor, y: torch.Tensor) -> None:
    if tuple(p.shape) != tuple(y.shape):
        raise ShapeMismatchError(f"{name}: prediction {tuple(p.shape)} vs ground truth {tuple(y.shape)}")


def bce(P: ArrayLike, Y: ArrayLike) -> torch.Tensor:
    """Mean binary cross entropy over all pixels"""
    p, y = _to_tensor(P), _to_tensor(Y)
    _check_shapes("bce", p, y)
    return _reduce(_pixel_log_likelihood(p, y))


def ag_bce(P: ArrayLike, Y: ArrayLike, W: ArrayLike) -> torch.Tensor:
    """Annotation-guided BCE: per-pixel weighted cross entropy, weights >= 1"""
    p, y, w = _to_tensor(P), _to_tensor(Y), _to_tensor(W)
    _check_shapes("ag_bce", p, y)
    if tuple(w.shape) != tuple(y.shape):
        raise ShapeMismatchError(f"ag_bce: weight map {tuple(w.shape)} vs ground truth {tuple(y.shape)}")
    if bool(torch.any(w < 1.0)):
        raise InvalidWeightsError("ag_bce: every weight must be >= 1")
    return _reduce(w * _pixel_log_likelihood(p, y))


def ag_bce_gradient(P: ArrayLike, Y: ArrayLike, W: ArrayLike) -> np.ndarray:
    """Analytic d ag_bce / d p_i = -(1/K) w_i (y_i / p_i - (1 - y_i) / (1 - p_i))"""
    p = _to_tensor(P).clamp(EPSILON, 1.0 - EPSILON).numpy()
    y, w = _to_tensor(Y).numpy(), _to_tensor(W).numpy()
    return -(w * (y / p - (1.0 - y) / (1.0 - p))) / p.size


def finite_difference_gradient(fn: Callable[[np.ndarray], float], P: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function, element by element"""
    P = np.array(P, dtype=np.float64)
    grad = np.zeros_like(P)
    for index in np.ndindex(P.shape):
        original = P[index]
        P[index] = original + h
        forward = float(fn(P))
        P[index] = original - h
        backward = float(fn(P))
        P[index] = original
        grad[index] = (forward - backward) / (2.0 * h)
    return grad


def multiscale_targets(y1: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Y1..Y4 by downsample_mask on every (H, W) slice of the batch"""
    height, width = y1.shape[-2:]
    if height % 8 or width % 8:
        raise ShapeMismatchError(f"ground truth {tuple(y1.shape)} not divisible by 8")
    leading = tuple(y1.shape[:-2])
    slices = y1.detach().cpu().numpy().reshape(-1, height, width)
    pyramid = [y1]
    for factor in (2, 4, 8):
        labels = [downsample_mask(BinaryMask(labels=s), factor).labels for s in slices]
        stacked = np.stack(labels).reshape(*leading, height // factor, width // factor)
        pyramid.append(torch.as_tensor(stacked).to(dtype=y1.dtype, device=y1.device))
    return tuple(pyramid)


def loss_components(pred: MultiScalePrediction, gts: Sequence[Optional[ArrayLike]], W: ArrayLike,
                    deep_supervision: bool = True) -> Dict[str, torch.Tensor]:
    """Uncoefficiented per-head losses: AG-BCE at full resolution, BCE elsewhere"""
    y1 = gts[0]
    p1, w = _to_tensor(pred.p1), _to_tensor(W)
    if tuple(w.shape) != tuple(_to_tensor(y1).shape):
        raise ShapeMismatchError(f"scale p1: weight map {tuple(w.shape)} vs ground truth {tuple(_to_tensor(y1).shape)}")
    _check_shapes("scale p1", p1, _to_tensor(y1))
    components = {"p1": ag_bce(pred.p1, y1, W)}
    if not deep_supervision:
        return components

    for name, index in (("p2", 1), ("p3", 2), ("p4", 3)):
        p = getattr(pred, name)
        y = gts[index] if len(gts) > index else None
        if p is None or y is None:
            raise ShapeMismatchError(f"scale {name}: missing prediction or ground truth with deep supervision on")
        _check_shapes(f"scale {name}", _to_tensor(p), _to_tensor(y))
        components[name] = bce(p, y)
    return components


def combine_components(components: Dict[str, torch.Tensor]) -> torch.Tensor:
    """Weighted sum in fixed order p4, p3, p2, p1"""
    total = None
    for name in ("p4", "p3", "p2", "p1"):
        if name in components:
            term = SCALE_COEFFICIENTS[name] * components[name]
            total = term if total is None else total + term
    return total


def training_loss(pred: MultiScalePrediction, gts: Sequence[Optional[ArrayLike]], W: ArrayLike,
                  deep_supervision: bool = True) -> torch.Tensor:
    """0.125 BCE(P4,Y4) + 0.25 BCE(P3,Y3) + 0.5 BCE(P2,Y2) + 1.0 AG-BCE(P1,Y1,W).

    With deep supervision disabled only the AG-BCE term remains.
    """
    return combine_components(loss_components(pred, gts, W, deep_supervision))
