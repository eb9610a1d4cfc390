import math

import numpy as np
import pytest
import torch

from app.core.exceptions import InvalidWeightsError, ShapeMismatchError
from app.core.types import BinaryMask, MultiScalePrediction
from app.modules.losses.services import (EPSILON, SCALE_COEFFICIENTS, ag_bce, ag_bce_gradient, bce,
                                         finite_difference_gradient, loss_components, multiscale_targets,
                                         training_loss)
from app.modules.synthdata.services import downsample_mask


def _instance(rng, shape=(8, 8)):
    p = rng.uniform(0.01, 0.99, size=shape)
    y = (rng.random(shape) > 0.5).astype(np.float64)
    return p, y


def _oracle(p, y, w=None):
    total = 0.0
    flat_p, flat_y = p.reshape(-1), y.reshape(-1)
    flat_w = np.ones_like(flat_p) if w is None else w.reshape(-1)
    for pi, yi, wi in zip(flat_p, flat_y, flat_w):
        pi = min(max(pi, EPSILON), 1 - EPSILON)
        total += wi * (yi * math.log(pi) + (1 - yi) * math.log(1 - pi))
    return -total / flat_p.size


def test_bce_uniform_half_is_ln2(rng):
    _, y = _instance(rng)
    assert float(bce(np.full((8, 8), 0.5), y)) == pytest.approx(math.log(2), abs=1e-12)


def test_bce_perfect_prediction_bounded(rng):
    _, y = _instance(rng)
    assert float(bce(y, y)) <= -math.log(1 - EPSILON) * (1 + 1e-9)


def test_bce_matches_summation_oracle(rng):
    for _ in range(20):
        p, y = _instance(rng, (2, 2))
        assert float(bce(p, y)) == pytest.approx(_oracle(p, y), abs=1e-12)


def test_ag_bce_with_unit_weights_is_bce_bitwise(rng):
    for _ in range(1000):
        p, y = _instance(rng, (6, 6))
        assert float(ag_bce(p, y, np.ones_like(p))) == float(bce(p, y))


def test_ag_bce_uniform_weight_scales(rng):
    for c in (1.5, 4.0, 12.0):
        p, y = _instance(rng)
        expected = c * float(bce(p, y))
        assert float(ag_bce(p, y, np.full_like(p, c))) == pytest.approx(expected, rel=1e-12)


def test_ag_bce_hand_set_case():
    p = np.array([[0.9, 0.2], [0.3, 0.6]])
    y = np.array([[0.0, 0.0], [1.0, 1.0]])
    w = np.array([[12.0, 1.0], [1.0, 1.0]])
    assert float(ag_bce(p, y, w)) == pytest.approx(_oracle(p, y, w), abs=1e-12)


def test_ag_bce_rejects_small_weights(rng):
    p, y = _instance(rng)
    w = np.ones_like(p)
    w[0, 0] = 0.5
    with pytest.raises(InvalidWeightsError):
        ag_bce(p, y, w)


def test_shape_mismatch(rng):
    p, y = _instance(rng)
    with pytest.raises(ShapeMismatchError):
        bce(p, y[:4])
    with pytest.raises(ShapeMismatchError):
        ag_bce(p, y, np.ones((4, 4)))


def test_weight_linearity(rng):
    p, y = _instance(rng)
    w0 = np.where(rng.random(p.shape) > 0.7, 12.0, 1.0)
    assert float(ag_bce(p, y, 2.0 * w0)) == pytest.approx(2.0 * float(ag_bce(p, y, w0)), rel=1e-12)


def test_raising_hard_weight_increases_loss(rng):
    p, y = _instance(rng)
    hard = np.zeros_like(p, dtype=bool)
    hard[2, 3] = True
    p[2, 3] = 0.5
    low = float(ag_bce(p, y, np.where(hard, 4.0, 1.0)))
    high = float(ag_bce(p, y, np.where(hard, 12.0, 1.0)))
    assert high > low


def test_analytic_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(50):
        p, y = _instance(rng)
        w = np.where(rng.random(p.shape) > 0.6, 12.0, 1.0)
        analytic = ag_bce_gradient(p, y, w)
        numeric = finite_difference_gradient(lambda q: float(ag_bce(q, y, w)), p, h=1e-5)
        error = np.abs(analytic - numeric) / np.maximum(np.abs(analytic), 1e-12)
        worst = max(worst, float(error.max()))
    assert worst < 1e-4


def test_analytic_gradient_matches_autograd(rng):
    p, y = _instance(rng)
    w = np.where(rng.random(p.shape) > 0.5, 12.0, 1.0)
    tensor = torch.tensor(p, dtype=torch.float64, requires_grad=True)
    ag_bce(tensor, y, w).backward()
    np.testing.assert_allclose(tensor.grad.numpy(), ag_bce_gradient(p, y, w), rtol=1e-10)


def _pyramid(rng, side=16):
    y1 = torch.as_tensor((rng.random((2, 1, side, side)) > 0.5).astype(np.float64))
    gts = multiscale_targets(y1)
    preds = MultiScalePrediction(*(torch.as_tensor(rng.uniform(0.05, 0.95, size=tuple(g.shape))) for g in gts))
    return preds, gts


def test_multiscale_targets_use_top_left_pixels(rng):
    y1 = torch.as_tensor((rng.random((1, 1, 16, 16)) > 0.5).astype(np.float64))
    gts = multiscale_targets(y1)
    assert [tuple(g.shape[-2:]) for g in gts] == [(16, 16), (8, 8), (4, 4), (2, 2)]
    assert torch.equal(gts[3][0, 0], y1[0, 0, ::8, ::8])


def test_multiscale_targets_match_downsample_mask(rng):
    y1 = torch.as_tensor((rng.random((3, 1, 16, 16)) > 0.5).astype(np.float32))
    gts = multiscale_targets(y1)
    for factor, target in zip((2, 4, 8), gts[1:]):
        assert target.dtype == y1.dtype
        for row in range(3):
            expected = downsample_mask(BinaryMask(labels=y1[row, 0].numpy()), factor).labels
            np.testing.assert_array_equal(target[row, 0].numpy(), expected)


def test_training_loss_uniform_half(rng):
    preds, gts = _pyramid(rng)
    half = MultiScalePrediction(*(torch.full_like(p, 0.5) for p in preds))
    loss = training_loss(half, gts, torch.ones_like(gts[0]))
    assert float(loss) == pytest.approx(1.875 * math.log(2), abs=1e-12)


def test_training_loss_perfect_prediction(rng):
    _, gts = _pyramid(rng)
    perfect = MultiScalePrediction(*gts)
    assert float(training_loss(perfect, gts, torch.ones_like(gts[0]))) <= 1e-6


def test_training_loss_recomposes_from_components(rng):
    for _ in range(20):
        preds, gts = _pyramid(rng)
        w = torch.where(torch.as_tensor(rng.random(tuple(gts[0].shape))) > 0.7, 12.0, 1.0).double()
        expected = (0.125 * float(bce(preds.p4, gts[3])) + 0.25 * float(bce(preds.p3, gts[2]))
                    + 0.5 * float(bce(preds.p2, gts[1])) + 1.0 * float(ag_bce(preds.p1, gts[0], w)))
        assert float(training_loss(preds, gts, w)) == pytest.approx(expected, abs=1e-12)


def test_training_loss_without_deep_supervision(rng):
    preds, gts = _pyramid(rng)
    w = torch.ones_like(gts[0])
    single = MultiScalePrediction(preds.p1)
    assert float(training_loss(single, gts, w, deep_supervision=False)) == float(ag_bce(preds.p1, gts[0], w))


def test_missing_head_named_in_error(rng):
    preds, gts = _pyramid(rng)
    with pytest.raises(ShapeMismatchError, match="scale p3"):
        training_loss(preds._replace(p3=preds.p3[..., :2, :2]), gts, torch.ones_like(gts[0]))
    with pytest.raises(ShapeMismatchError, match="p2"):
        training_loss(preds._replace(p2=None), gts, torch.ones_like(gts[0]))


def test_components_use_scale_coefficients(rng):
    preds, gts = _pyramid(rng)
    components = loss_components(preds, gts, torch.ones_like(gts[0]))
    assert set(components) == set(SCALE_COEFFICIENTS)
