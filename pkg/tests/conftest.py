"""
Shared fixtures: small synthetic datasets and a miniature network configuration
"""
import os

import numpy as np
import pytest

from app.core.config import build_model_config, build_train_config
from app.core.types import BinaryMask, CaseRecord, Image2D
from app.modules.synthdata.schemas import PerturbParams, SynthParams
from app.modules.synthdata.services import assign_splits, generate_dataset, simulate_nonexpert
from app.shared.seeding import derive_seed

RUN_SLOW = os.getenv("MICROSEGNET_RUN_SLOW", "0") == "1"


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip = pytest.mark.skip(reason="desk-scale run; set MICROSEGNET_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def annotate(records, seed=0, amplitude_px=2.0, correlation_len_px=6.0):
    """Attach simulated non-expert masks the way gen-data does"""
    annotated = []
    for record in records:
        params = PerturbParams(amplitude_px=amplitude_px, correlation_len_px=correlation_len_px,
                               seed=derive_seed(seed, 1, int(record.case_id.split("_")[1]), record.slice_index))
        annotated.append(record.with_updates(nonexpert_mask=simulate_nonexpert(record.expert_mask, params)))
    return annotated


def make_dataset(num_cases=4, slices_per_case=2, image_size=64, n_test=1, seed=3, **params):
    synth = SynthParams(num_cases=num_cases, slices_per_case=slices_per_case, image_size=image_size,
                        seed=seed, **params)
    records = annotate(generate_dataset(synth), seed=seed)
    splits = assign_splits([r.case_id for r in records], n_test=n_test, seed=seed)
    return [r.with_updates(split=splits[r.case_id]) for r in records]


def square_record(size=16, case_id="case_000", slice_index=0, split="train", offset=0):
    pixels = np.linspace(0.0, 1.0, size * size, dtype=np.float32).reshape(size, size)
    expert = np.zeros((size, size), dtype=np.uint8)
    expert[4:12, 4:12] = 1
    nonexpert = np.zeros((size, size), dtype=np.uint8)
    nonexpert[4 + offset:12 + offset, 4:12] = 1
    return CaseRecord(
        image=Image2D(pixels=pixels, case_id=case_id, slice_index=slice_index),
        expert_mask=BinaryMask(labels=expert),
        nonexpert_mask=BinaryMask(labels=nonexpert),
        case_id=case_id,
        slice_index=slice_index,
        split=split,
    )


def assert_records_equal(a: CaseRecord, b: CaseRecord, atol=1e-6):
    assert (a.case_id, a.slice_index) == (b.case_id, b.slice_index)
    np.testing.assert_allclose(a.image.pixels, b.image.pixels, atol=atol)
    np.testing.assert_array_equal(a.expert_mask.labels, b.expert_mask.labels)
    for field in ("nonexpert_mask", "hard_mask"):
        left, right = getattr(a, field), getattr(b, field)
        assert (left is None) == (right is None)
        if left is not None:
            np.testing.assert_array_equal(left.labels, right.labels)


@pytest.fixture
def small_dataset():
    return make_dataset()


@pytest.fixture
def mini_model_config():
    return build_model_config("tiny", input_size=32, embed_dim=32, num_layers=2, num_heads=4,
                              stem_channels=(8, 16, 32))


@pytest.fixture
def mini_train_config():
    return build_train_config(epochs=2, batch_size=4, num_runs=1, device="cpu", workers=1, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
