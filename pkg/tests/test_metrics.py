import math

import numpy as np
import pytest

from app.core.exceptions import EmptyBoundaryError, ShapeMismatchError
from app.core.types import BinaryMask, ProbabilityMap
from app.modules.metrics.oracles import boundary_oracle, dice_oracle, hausdorff_oracle, hd95_oracle
from app.modules.metrics.repository import read_metric_table, write_metric_table
from app.modules.metrics.services import (binarize, dice, directed_distances, extract_boundary, hausdorff,
                                          hd95, region_dice, safe_hd95)


def _random_pairs(count=100, size=16, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < count:
        density = rng.uniform(0.2, 0.8)
        g = rng.random((size, size)) < density
        p = rng.random((size, size)) < density
        if g.any() and p.any():
            pairs.append((g, p))
    return pairs


def _column(size, col, rows=(2, 12)):
    mask = np.zeros((size, size), dtype=np.uint8)
    mask[rows[0]:rows[1], col] = 1
    return mask


def test_dice_matches_oracle():
    for g, p in _random_pairs():
        assert dice(g, p) == pytest.approx(dice_oracle(g, p), abs=1e-12)


def test_boundary_matches_oracle():
    for g, _ in _random_pairs(count=30):
        assert extract_boundary(g) == set(boundary_oracle(g))


def test_hd95_matches_oracle():
    for g, p in _random_pairs():
        assert hd95(g, p, spacing_mm=(1.0, 1.0)) == pytest.approx(hd95_oracle(g, p), rel=1e-9, abs=1e-9)


def test_hd95_anisotropic_and_pooled_match_oracle():
    for g, p in _random_pairs(count=25, seed=5):
        assert hd95(g, p, spacing_mm=(0.1, 0.25)) == pytest.approx(hd95_oracle(g, p, (0.1, 0.25)), rel=1e-9)
        assert hd95(g, p, spacing_mm=(1.0, 1.0), pooled=True) == \
            pytest.approx(hd95_oracle(g, p, pooled=True), rel=1e-9, abs=1e-9)


def test_hausdorff_matches_oracle():
    for g, p in _random_pairs(count=30, seed=2):
        assert hausdorff(g, p, spacing_mm=(1.0, 1.0)) == pytest.approx(hausdorff_oracle(g, p), rel=1e-9)


def test_dice_edge_cases():
    empty = np.zeros((8, 8), dtype=np.uint8)
    full = np.ones((8, 8), dtype=np.uint8)
    assert dice(empty, empty) == 1.0
    assert dice(full, empty) == 0.0
    assert dice(full, full) == 1.0
    half = full.copy()
    half[:4] = 0
    assert dice(full, half) == pytest.approx(2 * 32 / (64 + 32))


def test_dice_rejects_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        dice(np.ones((4, 4)), np.ones((4, 5)))


def test_identical_masks_have_zero_hd95():
    g = _random_pairs(count=1)[0][0]
    assert hd95(g, g) == 0.0
    assert hausdorff(g, g) == 0.0


def test_five_column_shift_is_half_a_millimetre():
    g, p = _column(16, 2), _column(16, 7)
    assert hd95(g, p, spacing_mm=(0.1, 0.1)) == pytest.approx(0.5)
    assert hausdorff(g, p, spacing_mm=(0.1, 0.1)) == pytest.approx(0.5)


def test_spacing_is_taken_from_masks():
    g = BinaryMask(labels=_column(16, 2), spacing_mm=(0.2, 0.2))
    p = BinaryMask(labels=_column(16, 7), spacing_mm=(0.2, 0.2))
    assert hd95(g, p) == pytest.approx(1.0)


def test_empty_mask_raises_empty_boundary():
    empty = np.zeros((8, 8), dtype=np.uint8)
    other = np.zeros((8, 8), dtype=np.uint8)
    other[2:5, 2:5] = 1
    with pytest.raises(EmptyBoundaryError):
        hd95(empty, other)
    with pytest.raises(EmptyBoundaryError):
        directed_distances(other, empty)
    assert math.isnan(safe_hd95(empty, other))


def test_block_boundary_has_eight_pixels():
    mask = np.zeros((5, 5), dtype=np.uint8)
    mask[1:4, 1:4] = 1
    assert extract_boundary(mask) == {(r, c) for r in range(1, 4) for c in range(1, 4)} - {(2, 2)}


def test_full_mask_boundary_is_the_image_frame():
    boundary = extract_boundary(np.ones((4, 4), dtype=np.uint8))
    assert len(boundary) == 12
    assert (1, 1) not in boundary and (0, 0) in boundary


def test_hd95_bounded_by_hausdorff():
    for g, p in _random_pairs(count=40, seed=9):
        assert hd95(g, p) <= hausdorff(g, p) + 1e-12


def test_hd95_translation_invariant():
    g = np.zeros((24, 24), dtype=np.uint8)
    p = np.zeros((24, 24), dtype=np.uint8)
    g[4:10, 4:12] = 1
    p[5:12, 6:12] = 1
    shifted_g, shifted_p = np.roll(g, (6, 5), axis=(0, 1)), np.roll(p, (6, 5), axis=(0, 1))
    assert hd95(g, p) == pytest.approx(hd95(shifted_g, shifted_p))


def test_region_dice():
    g, p = _random_pairs(count=1, seed=4)[0]
    assert region_dice(g, p, np.ones_like(g)) == pytest.approx(dice(g, p))
    region = np.zeros_like(g)
    assert region_dice(g, p, region) == 1.0
    with pytest.raises(ShapeMismatchError):
        region_dice(g, p, np.ones((3, 3)))


def test_binarize_threshold_is_inclusive():
    probs = ProbabilityMap(probs=np.array([[0.49, 0.5], [0.51, 1.0]]))
    mask = binarize(probs, spacing_mm=(0.2, 0.3))
    assert mask.labels.tolist() == [[0, 1], [1, 1]]
    assert mask.spacing_mm == (0.2, 0.3)
    assert binarize(np.array([[0.6]]), threshold=0.7).area == 0


def test_metric_table_formatting(tmp_path):
    path = write_metric_table(str(tmp_path / "m.csv"), [
        {"case_id": "case_000", "slice_index": 0, "dice": 0.5, "hd95_mm": float("nan")},
    ])
    rows = read_metric_table(path)
    assert rows == [{"case_id": "case_000", "slice_index": "0", "dice": "0.500000", "hd95_mm": "nan"}]


def test_single_pixel_and_disjoint_masks():
    g = np.zeros((10, 10), dtype=np.uint8)
    p = np.zeros((10, 10), dtype=np.uint8)
    g[2, 2] = 1
    p[5, 6] = 1
    assert dice(g, p) == 0.0
    assert extract_boundary(g) == {(2, 2)}
    assert hd95(g, p, spacing_mm=(1.0, 1.0)) == pytest.approx(5.0)
    assert hd95(g, p, spacing_mm=(1.0, 1.0)) == pytest.approx(hd95_oracle(g, p), abs=1e-9)
