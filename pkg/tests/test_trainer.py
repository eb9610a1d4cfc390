import math

import numpy as np
import pytest
import torch

from app.core.config import build_train_config
from app.core.exceptions import DataLeakageError, DatasetError, TrainingDivergedError
from app.modules.hard_region.services import compute_hard_mask
from app.modules.trainer import services as trainer_services
from app.modules.trainer.repository import read_csv_rows, write_runs_table, write_training_log
from app.modules.trainer.services import (SegmentationTrainer, build_optimizer, check_no_leakage, multi_run,
                                          prepare_records, split_records, train)
from tests.conftest import square_record


@pytest.fixture
def fast_config(mini_train_config):
    return mini_train_config.model_copy(update={"epochs": 4, "batch_size": 2, "val_fraction": 0.0,
                                                "learning_rate": 0.02})


def test_prepare_records_attaches_weight_maps(small_dataset, mini_model_config, mini_train_config):
    prepared = prepare_records(small_dataset[:2], mini_model_config, mini_train_config)
    for record in prepared:
        assert record.image.shape == (32, 32)
        assert record.expert_mask.shape == (32, 32)
        weights = record.weight_map.weights
        assert set(np.unique(weights).tolist()) <= {1.0, 12.0}
        np.testing.assert_array_equal(weights == 12.0, record.hard_mask.labels == 1)


def test_split_records_carves_validation_patients(small_dataset, mini_train_config):
    train_records, val_records = split_records(small_dataset, mini_train_config)
    train_ids = {r.case_id for r in train_records}
    val_ids = {r.case_id for r in val_records}
    assert len(val_ids) == 1 and not train_ids & val_ids
    assert all(r.split != "test" for r in train_records + val_records)
    again = split_records(small_dataset, mini_train_config)[1]
    assert [r.key for r in again] == [r.key for r in val_records]


def test_leakage_is_rejected():
    shared = [square_record(case_id="case_000", split="train"),
              square_record(case_id="case_000", slice_index=1, split="test")]
    with pytest.raises(DataLeakageError, match="case_000"):
        check_no_leakage(shared[:1], shared[1:])
    with pytest.raises(DataLeakageError):
        split_records(shared, build_train_config(val_fraction=0.0))


def test_multi_run_rejects_test_records_from_the_training_pool(small_dataset, mini_model_config,
                                                                mini_train_config):
    train_pool = [r for r in small_dataset if r.split != "test"]
    with pytest.raises(DataLeakageError, match=train_pool[0].case_id):
        multi_run(mini_model_config, mini_train_config, small_dataset, n_runs=1, test_records=train_pool[:1])


def test_prepare_records_checks_cached_hard_mask_radius(mini_model_config, mini_train_config):
    record = square_record(size=32, offset=2)
    cached = record.with_updates(hard_mask=compute_hard_mask(record.expert_mask, record.nonexpert_mask, dilate_px=2))
    with pytest.raises(DatasetError, match="outside the disagreement"):
        prepare_records([cached], mini_model_config, mini_train_config)
    wide_cfg = mini_train_config.model_copy(update={"dilate_px": 2})
    prepared = prepare_records([cached], mini_model_config, wide_cfg)
    np.testing.assert_array_equal(prepared[0].hard_mask.labels, cached.hard_mask.labels)


def test_loss_decreases(small_dataset, mini_model_config, fast_config):
    _, log = train(mini_model_config, fast_config, small_dataset)
    assert len(log.epochs) == 4
    assert all(math.isfinite(v) for v in log.loss_curve)
    assert log.epoch_losses[-1] < log.epoch_losses[0]


def test_same_seed_gives_identical_log_bytes(tmp_path, small_dataset, mini_model_config, fast_config):
    paths = []
    for name in ("a", "b"):
        _, log = train(mini_model_config, fast_config, small_dataset)
        paths.append(write_training_log(str(tmp_path / name / "train_log.csv"), log))
    with open(paths[0], "rb") as first, open(paths[1], "rb") as second:
        assert first.read() == second.read()


def test_weight_ratio_changes_the_curve(small_dataset, mini_model_config, fast_config):
    _, heavy = train(mini_model_config, fast_config, small_dataset)
    _, flat = train(mini_model_config, fast_config.model_copy(update={"w_hard": 1.0}), small_dataset)
    assert heavy.loss_curve != flat.loss_curve


def test_step_log_columns(tmp_path, small_dataset, mini_model_config, fast_config):
    _, log = train(mini_model_config, fast_config.model_copy(update={"deep_supervision": False}), small_dataset)
    rows = read_csv_rows(write_training_log(str(tmp_path / "log.csv"), log))
    assert list(rows[0]) == ["step", "epoch", "loss", "loss_p1", "loss_p2", "loss_p3", "loss_p4"]
    assert rows[0]["loss_p2"] == "" and rows[0]["loss"] == rows[0]["loss_p1"]
    assert read_csv_rows(str(tmp_path / "missing.csv")) is None


def test_sgd_matches_momentum_oracle():
    cfg = build_train_config(learning_rate=0.1, momentum=0.9, weight_decay=0.01)
    theta = torch.nn.Parameter(torch.tensor([2.0], dtype=torch.float64))
    optimizer = build_optimizer([theta], cfg)
    curvature = 3.0

    expected, velocity = 2.0, 0.0
    for _ in range(6):
        optimizer.zero_grad()
        (0.5 * curvature * theta ** 2).sum().backward()
        optimizer.step()
        grad = curvature * expected
        velocity = cfg.momentum * velocity - cfg.learning_rate * (grad + cfg.weight_decay * expected)
        expected = expected + velocity
        assert theta.item() == pytest.approx(expected, rel=1e-9)


def test_non_finite_loss_raises(small_dataset, mini_model_config, fast_config):
    records = prepare_records([r for r in small_dataset if r.split != "test"], mini_model_config, fast_config)
    trainer = SegmentationTrainer(mini_model_config, fast_config, records)
    trainer.images[:] = float("nan")
    with pytest.raises(TrainingDivergedError, match="non-finite loss"):
        trainer.train()


def test_poly_schedule_decays_learning_rate(small_dataset, mini_model_config, fast_config):
    _, constant = train(mini_model_config, fast_config, small_dataset)
    _, poly = train(mini_model_config, fast_config.model_copy(update={"lr_schedule": "poly"}), small_dataset)
    assert {s.lr for s in constant.steps} == {0.02}
    rates = [s.lr for s in poly.steps]
    assert rates[0] == pytest.approx(0.02)
    assert all(later < earlier for earlier, later in zip(rates, rates[1:]))


def test_augmentation_changes_the_curve_deterministically(small_dataset, mini_model_config, fast_config):
    augmented = fast_config.model_copy(update={"augment": True})
    _, plain = train(mini_model_config, fast_config, small_dataset)
    _, first = train(mini_model_config, augmented, small_dataset)
    _, second = train(mini_model_config, augmented, small_dataset)
    assert first.loss_curve == second.loss_curve
    assert first.loss_curve != plain.loss_curve


def test_checkpoint_metadata(small_dataset, mini_model_config, fast_config):
    checkpoint, log = train(mini_model_config, fast_config, small_dataset)
    assert checkpoint["metadata"]["epoch"] == 4
    assert checkpoint["metadata"]["loss_curve"] == log.loss_curve


def test_multi_run_single(small_dataset, mini_model_config, mini_train_config):
    report = multi_run(mini_model_config, mini_train_config, small_dataset, n_runs=1)
    assert report["completed"] == 1 and report["failed"] == []
    assert report["dice_std"] == 0.0
    assert report["dice_mean"] == report["runs"][0]["dice"]


def test_multi_run_statistics(tmp_path, small_dataset, mini_model_config, mini_train_config):
    report = multi_run(mini_model_config, mini_train_config, small_dataset, n_runs=3)
    assert report["seeds"] == [0, 1, 2]
    assert [r["seed"] for r in report["runs"]] == [0, 1, 2]
    assert 0.0 <= report["dice_mean"] <= 1.0
    assert report["dice_std"] >= 0.0
    dice_values = [r["dice"] for r in report["runs"]]
    assert min(dice_values) - 1e-12 <= report["dice_mean"] <= max(dice_values) + 1e-12

    rows = read_csv_rows(write_runs_table(str(tmp_path / "runs.csv"), report))
    assert [row["run_index"] for row in rows] == ["0", "1", "2", "mean", "std"]


def test_multi_run_flags_failed_runs(monkeypatch, small_dataset, mini_model_config, mini_train_config):
    real_train = trainer_services.train

    def flaky_train(model_cfg, train_cfg, dataset):
        if train_cfg.seed == 1:
            raise TrainingDivergedError("non-finite loss at epoch 1, step 1")
        return real_train(model_cfg, train_cfg, dataset)

    monkeypatch.setattr(trainer_services, "train", flaky_train)
    report = multi_run(mini_model_config, mini_train_config, small_dataset, n_runs=2)
    assert report["completed"] == 1
    assert report["failed"] == [1]
    assert report["runs"][1]["success"] is False
    assert "non-finite" in report["runs"][1]["message"]
    assert report["dice_mean"] == report["runs"][0]["dice"]
