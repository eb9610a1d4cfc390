import logging

import numpy as np
import pytest

from app.core.exceptions import ConfigError, GenerationError, ShapeMismatchError
from app.core.types import BinaryMask, Image2D
from app.modules.metrics.services import dice
from app.modules.synthdata.schemas import PerturbParams, SynthParams
from app.modules.synthdata.services import (assign_splits, downsample_mask, generate_case, generate_dataset,
                                            in_sector, polar_angles, preprocess, resize_mask, simulate_nonexpert)
from tests.conftest import assert_records_equal


def test_generate_case_is_deterministic():
    params = SynthParams(seed=7)
    first, second = generate_case(params, 0), generate_case(params, 0)
    assert_records_equal(first, second, atol=0.0)
    assert first.nonexpert_mask is None
    assert first.case_id == "case_000"


def test_different_slices_differ():
    params = SynthParams(seed=7, image_size=64)
    a, b = generate_case(params, 0, 0), generate_case(params, 0, 1)
    assert not np.array_equal(a.image.pixels, b.image.pixels)


def test_noiseless_rendering_has_disjoint_histograms():
    params = SynthParams(seed=1, artifact_density=0.0, noise_level=0.0)
    for index in range(5):
        record = generate_case(params, index)
        inside = record.expert_mask.as_bool()
        assert record.image.pixels[inside].min() > record.image.pixels[~inside].max()


def test_area_fraction_envelope():
    params = SynthParams(num_cases=50)
    for index in range(50):
        mask = generate_case(params, index).expert_mask
        fraction = mask.area / mask.labels.size
        assert 0.05 <= fraction <= 0.45, (index, fraction)
        labels = mask.labels
        assert not (labels[0].any() or labels[-1].any() or labels[:, 0].any() or labels[:, -1].any())


def test_case_index_out_of_range():
    with pytest.raises(GenerationError):
        generate_case(SynthParams(num_cases=2), 2)


def test_synth_params_validated():
    with pytest.raises(ValueError):
        SynthParams(artifact_density=1.5)
    with pytest.raises(ValueError):
        SynthParams(num_cases=0)


def test_parallel_generation_matches_serial():
    params = SynthParams(num_cases=3, slices_per_case=2, image_size=32, seed=5)
    serial = generate_dataset(params, workers=1)
    parallel = generate_dataset(params, workers=2)
    assert len(serial) == len(parallel) == 6
    for a, b in zip(serial, parallel):
        assert_records_equal(a, b, atol=0.0)


@pytest.fixture(scope="module")
def expert_masks():
    params = SynthParams(num_cases=4, image_size=128, seed=11)
    return [generate_case(params, i).expert_mask for i in range(4)]


def test_zero_amplitude_is_identity(expert_masks):
    out = simulate_nonexpert(expert_masks[0], PerturbParams(amplitude_px=0.0, seed=3))
    np.testing.assert_array_equal(out.labels, expert_masks[0].labels)


def test_nonexpert_is_deterministic(expert_masks):
    params = PerturbParams(amplitude_px=3.0, seed=9)
    a = simulate_nonexpert(expert_masks[1], params)
    b = simulate_nonexpert(expert_masks[1], params)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert set(np.unique(a.labels)) <= {0, 1}


def test_empty_expert_rejected():
    with pytest.raises(GenerationError):
        simulate_nonexpert(BinaryMask(labels=np.zeros((32, 32), dtype=np.uint8)), PerturbParams())


def test_disagreement_concentrates_in_blur_sector(expert_masks):
    inside_total = outside_total = 0
    for seed in range(20):
        expert = expert_masks[seed % len(expert_masks)]
        params = PerturbParams(amplitude_px=3.0, hard_sector_gain=3.0, seed=seed)
        xor = np.logical_xor(expert.as_bool(), simulate_nonexpert(expert, params).as_bool())
        centroid = np.argwhere(expert.labels).mean(axis=0)
        sector = in_sector(polar_angles(expert.shape, tuple(centroid)), params.sector_deg)
        inside_total += np.count_nonzero(xor & sector)
        outside_total += np.count_nonzero(xor & ~sector)
    assert inside_total > outside_total


def test_dice_decreases_with_amplitude(expert_masks):
    means = []
    for amplitude in (1.0, 2.0, 4.0):
        scores = []
        for seed in range(20):
            expert = expert_masks[seed % len(expert_masks)]
            out = simulate_nonexpert(expert, PerturbParams(amplitude_px=amplitude, seed=seed))
            scores.append(dice(expert, out))
        assert all(0.0 < s <= 1.0 for s in scores)
        means.append(np.mean(scores))
    assert means[0] > means[1] > means[2]


def test_preprocess_downsizes_and_rescales_spacing():
    pixels = np.random.default_rng(0).uniform(0, 1, size=(448, 448)).astype(np.float32)
    out = preprocess(Image2D(pixels=pixels, spacing_mm=(0.1, 0.1)), 224)
    assert out.shape == (224, 224)
    assert out.spacing_mm == pytest.approx((0.2, 0.2))


def test_preprocess_identity_on_normalized_input():
    pixels = np.random.default_rng(1).uniform(0, 1, size=(224, 224)).astype(np.float32)
    pixels[0, 0], pixels[0, 1] = 0.0, 1.0
    out = preprocess(Image2D(pixels=pixels), 224)
    np.testing.assert_allclose(out.pixels, pixels, atol=1e-6)


def test_preprocess_min_max():
    pixels = np.linspace(10, 250, 64 * 64, dtype=np.float32).reshape(64, 64)
    out = preprocess(Image2D(pixels=pixels), 32)
    assert out.pixels.min() == pytest.approx(0.0)
    assert out.pixels.max() == pytest.approx(1.0)


def test_preprocess_constant_image_warns(caplog):
    with caplog.at_level(logging.WARNING):
        out = preprocess(Image2D(pixels=np.full((16, 16), 3.0)), 16)
    assert not out.pixels.any()
    assert "Constant image" in caplog.text


def test_preprocess_rejects_small_target():
    with pytest.raises(ConfigError):
        preprocess(Image2D(pixels=np.zeros((16, 16))), 4)


def test_downsample_constant_field():
    ones = BinaryMask(labels=np.ones((16, 16), dtype=np.uint8))
    for factor in (2, 4, 8):
        out = downsample_mask(ones, factor)
        assert out.shape == (16 // factor, 16 // factor)
        assert out.labels.all()


def test_downsample_checkerboard_takes_top_left():
    board = (np.indices((4, 4)).sum(axis=0) % 2).astype(np.uint8)
    out = downsample_mask(BinaryMask(labels=board, spacing_mm=(0.1, 0.2)), 2)
    expected = np.array([[board[r, c] for c in (0, 2)] for r in (0, 2)])
    np.testing.assert_array_equal(out.labels, expected)
    assert out.spacing_mm == pytest.approx((0.2, 0.4))


def test_downsample_composes(rng):
    mask = BinaryMask(labels=(rng.random((32, 32)) > 0.5).astype(np.uint8))
    np.testing.assert_array_equal(downsample_mask(downsample_mask(mask, 2), 2).labels,
                                  downsample_mask(mask, 4).labels)


def test_downsample_errors():
    with pytest.raises(ShapeMismatchError):
        downsample_mask(BinaryMask(labels=np.zeros((10, 10), dtype=np.uint8)), 4)
    with pytest.raises(ConfigError):
        downsample_mask(BinaryMask(labels=np.zeros((12, 12), dtype=np.uint8)), 3)


def test_resize_mask_stays_binary(rng):
    mask = BinaryMask(labels=(rng.random((64, 64)) > 0.5).astype(np.uint8))
    out = resize_mask(mask, 32)
    assert out.shape == (32, 32)
    assert set(np.unique(out.labels)) <= {0, 1}
    assert out.spacing_mm == pytest.approx((0.2, 0.2))


def test_assign_splits_default_proportions():
    ids = [f"case_{i:03d}" for i in range(75)]
    splits = assign_splits(ids, n_test=20, seed=4)
    assert sum(v == "test" for v in splits.values()) == 20
    assert sum(v == "train" for v in splits.values()) == 55
    assert splits == assign_splits(ids, n_test=20, seed=4)
    with pytest.raises(ConfigError):
        assign_splits(ids, n_test=75)
