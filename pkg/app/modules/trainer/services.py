"""
Trainer Services - SGD training loop, scoring and multi-run averaging

Data order, augmentation and initialization all derive from the run seed,
so (seed, configs, dataset) fully determine the loss curve.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

from app.core.config import PROGRESS_BARS, ModelConfig, TrainConfig
from app.core.exceptions import DataLeakageError, DatasetError, MicroSegNetError, TrainingDivergedError
from app.core.types import BinaryMask, CaseRecord
from app.core.validators import validate_case
from app.modules.hard_region.services import derive_region_artifacts
from app.modules.losses.services import combine_components, loss_components, multiscale_targets
from app.modules.metrics.services import binarize, dice, region_dice, safe_hd95
from app.modules.model.network import MicroSegNet
from app.modules.model.repository import Checkpoint, make_checkpoint
from app.modules.model.services import build_model, predict_probabilities
from app.modules.synthdata.services import preprocess, resize_mask
from app.shared.seeding import derive_rng, epoch_permutation, seed_everything
from .schemas import EpochRecord, StepRecord, TrainingLog

logger = logging.getLogger(__name__)

POLY_POWER = 0.9


def _resized(mask: Optional[BinaryMask], size: int) -> Optional[BinaryMask]:
    return None if mask is None else resize_mask(mask, size)


def prepare_records(records: Iterable[CaseRecord], model_cfg: ModelConfig,
                    train_cfg: TrainConfig) -> List[CaseRecord]:
    """Validate, resize to input_size and attach hard masks plus weight maps"""
    prepared = []
    for record in records:
        violations = validate_case(record, dilate_px=train_cfg.dilate_px)
        if violations:
            raise DatasetError("; ".join(violations), case_id=record.case_id)
        size = model_cfg.input_size
        record = record.with_updates(
            image=preprocess(record.image, size),
            expert_mask=resize_mask(record.expert_mask, size),
            nonexpert_mask=_resized(record.nonexpert_mask, size),
            hard_mask=_resized(record.hard_mask, size),
            weight_map=None,
        )
        prepared.append(derive_region_artifacts(record, train_cfg.w_hard, train_cfg.w_easy, train_cfg.dilate_px))
    return prepared


def check_no_leakage(train_records: Sequence[CaseRecord], test_records: Sequence[CaseRecord]) -> None:
    shared = sorted({r.case_id for r in train_records} & {r.case_id for r in test_records})
    if shared:
        raise DataLeakageError(f"case_ids present in both train and test: {', '.join(shared)}")


def split_records(dataset: Sequence[CaseRecord], train_cfg: TrainConfig) -> Tuple[List[CaseRecord], List[CaseRecord]]:
    """(train, val) records; val patients are carved from training patients by seed"""
    test = [r for r in dataset if r.split == "test"]
    pool = [r for r in dataset if r.split != "test"]
    check_no_leakage(pool, test)

    tagged_val = {r.case_id for r in pool if r.split == "val"}
    candidates = sorted({r.case_id for r in pool} - tagged_val)
    n_val = 0
    if not tagged_val and train_cfg.val_fraction > 0 and len(candidates) >= 2:
        n_val = max(1, int(round(train_cfg.val_fraction * len(candidates))))
    order = derive_rng(train_cfg.seed, 101).permutation(len(candidates))
    val_ids = tagged_val | {candidates[i] for i in order[:n_val]}

    train = [r for r in pool if r.case_id not in val_ids]
    val = [r for r in pool if r.case_id in val_ids]
    if not train:
        raise DatasetError("no training slices left after the validation split")
    return train, val


def build_optimizer(parameters, train_cfg: TrainConfig) -> torch.optim.SGD:
    """SGD with momentum and L2 weight decay: v <- m v + (g + wd theta); theta <- theta - lr v"""
    return torch.optim.SGD(parameters, lr=train_cfg.learning_rate, momentum=train_cfg.momentum,
                           weight_decay=train_cfg.weight_decay)


def build_scheduler(optimizer: torch.optim.Optimizer, train_cfg: TrainConfig,
                    total_steps: int) -> Optional[torch.optim.lr_scheduler.LambdaLR]:
    if train_cfg.lr_schedule != "poly":
        return None
    return torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: max(0.0, 1.0 - step / max(total_steps, 1)) ** POLY_POWER)


class SegmentationTrainer:
    """One training run: tensors, model, optimizer and the step loop"""

    def __init__(self, model_cfg: ModelConfig, train_cfg: TrainConfig,
                 train_records: Sequence[CaseRecord], val_records: Sequence[CaseRecord] = ()):
        self.model_cfg = model_cfg
        self.train_cfg = train_cfg
        self.device = torch.device(train_cfg.device)
        self.val_records = list(val_records)
        self.setup_data(train_records)
        self.setup_model()
        self.setup_optimizer()
        self.log = TrainingLog(seed=train_cfg.seed, deep_supervision=train_cfg.deep_supervision)

    def setup_data(self, records: Sequence[CaseRecord]) -> None:
        self.images = torch.as_tensor(np.stack([r.image.pixels for r in records]), dtype=torch.float32)[:, None]
        self.targets = torch.as_tensor(np.stack([r.expert_mask.labels for r in records]), dtype=torch.float32)[:, None]
        self.weights = torch.as_tensor(np.stack([r.weight_map.weights for r in records]), dtype=torch.float64)[:, None]
        self.num_samples = len(records)

    def setup_model(self) -> None:
        seed_everything(self.train_cfg.seed)
        self.model = build_model(self.model_cfg, deep_supervision=self.train_cfg.deep_supervision,
                                 seed=self.train_cfg.seed).to(self.device)

    def setup_optimizer(self) -> None:
        self.steps_per_epoch = math.ceil(self.num_samples / self.train_cfg.batch_size)
        self.optimizer = build_optimizer(self.model.parameters(), self.train_cfg)
        self.scheduler = build_scheduler(self.optimizer, self.train_cfg,
                                         self.steps_per_epoch * self.train_cfg.epochs)

    def _augment(self, images: torch.Tensor, targets: torch.Tensor, weights: torch.Tensor,
                 epoch: int, indices: Sequence[int]):
        """Horizontal flips and a mild intensity scale, one draw per (seed, epoch, sample)"""
        images, targets, weights = images.clone(), targets.clone(), weights.clone()
        for row, index in enumerate(indices):
            rng = derive_rng(self.train_cfg.seed, epoch, index, 31)
            if rng.random() < 0.5:
                images[row] = images[row].flip(-1)
                targets[row] = targets[row].flip(-1)
                weights[row] = weights[row].flip(-1)
            images[row] = (images[row] * float(rng.uniform(0.9, 1.1))).clamp(0.0, 1.0)
        return images, targets, weights

    def _batch(self, indices: Sequence[int], epoch: int):
        index = torch.as_tensor(indices, dtype=torch.long)
        images, targets, weights = self.images[index], self.targets[index], self.weights[index]
        if self.train_cfg.augment:
            images, targets, weights = self._augment(images, targets, weights, epoch, indices)
        return images.to(self.device), targets.to(self.device), weights.to(self.device)

    def train_step(self, step: int, epoch: int, indices: Sequence[int]) -> StepRecord:
        images, targets, weights = self._batch(indices, epoch)
        prediction = self.model(images)
        components = loss_components(prediction, multiscale_targets(targets), weights,
                                     self.train_cfg.deep_supervision)
        loss = combine_components(components)
        if not torch.isfinite(loss):
            detail = ", ".join(f"{k}={float(v.detach()):.4g}" for k, v in sorted(components.items()))
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, step {step} ({detail})")

        lr = self.optimizer.param_groups[0]["lr"]
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        if self.scheduler is not None:
            self.scheduler.step()

        values = {f"loss_{k}": float(v.detach()) for k, v in components.items()}
        return StepRecord(step=step, epoch=epoch, loss=float(loss.detach()), lr=lr, **values)

    def validate(self) -> Optional[float]:
        if not self.val_records:
            return None
        scores = score_records(self.model, self.val_records, self.train_cfg.threshold)
        return float(np.mean([row["dice"] for row in scores]))

    def train(self) -> TrainingLog:
        step = 0
        epochs = tqdm(range(1, self.train_cfg.epochs + 1), desc="train", disable=not PROGRESS_BARS)
        for epoch in epochs:
            self.model.train()
            order = epoch_permutation(self.train_cfg.seed, epoch, self.num_samples)
            epoch_losses = []
            for start in range(0, self.num_samples, self.train_cfg.batch_size):
                step += 1
                record = self.train_step(step, epoch, order[start:start + self.train_cfg.batch_size])
                self.log.steps.append(record)
                epoch_losses.append(record.loss)
            val_dice = self.validate()
            self.log.epochs.append(EpochRecord(epoch=epoch, mean_loss=float(np.mean(epoch_losses)), val_dice=val_dice))
            epochs.set_postfix(loss=f"{np.mean(epoch_losses):.4f}")
            logger.info(f"[*] epoch {epoch}/{self.train_cfg.epochs} loss={np.mean(epoch_losses):.4f}"
                        + (f" val_dice={val_dice:.4f}" if val_dice is not None else ""))
        return self.log

    def checkpoint(self) -> Checkpoint:
        return make_checkpoint(self.model, self.train_cfg, metadata={
            "epoch": self.train_cfg.epochs,
            "seed": self.train_cfg.seed,
            "loss_curve": self.log.loss_curve,
            "epoch_losses": self.log.epoch_losses,
            "val_dice": [e.val_dice for e in self.log.epochs],
        })


def train(model_cfg: ModelConfig, train_cfg: TrainConfig,
          dataset: Sequence[CaseRecord]) -> Tuple[Checkpoint, TrainingLog]:
    """Train one model on the non-test records of a dataset"""
    train_records, val_records = split_records(dataset, train_cfg)
    train_records = prepare_records(train_records, model_cfg, train_cfg)
    val_records = prepare_records(val_records, model_cfg, train_cfg)
    logger.info(f"[*] Training seed={train_cfg.seed} on {len(train_records)} slices "
                f"({len(val_records)} validation), w_hard/w_easy={train_cfg.weight_ratio:g}, "
                f"deep_supervision={train_cfg.deep_supervision}")
    trainer = SegmentationTrainer(model_cfg, train_cfg, train_records, val_records)
    log = trainer.train()
    logger.info(f"[OK] Finished seed={train_cfg.seed}: loss {log.loss_curve[0]:.4f} -> {log.loss_curve[-1]:.4f}")
    return trainer.checkpoint(), log


def score_records(model: MicroSegNet, records: Sequence[CaseRecord], threshold: float = 0.5) -> List[Dict[str, Any]]:
    """Per-slice Dice, HD95 and hard/easy Dice on preprocessed records"""
    if not records:
        return []
    probs = predict_probabilities(model, [r.image for r in records])
    rows = []
    for record, prob in zip(records, probs):
        predicted = binarize(prob, threshold, record.expert_mask.spacing_mm)
        expert = record.expert_mask
        hard = record.hard_mask
        has_hard = hard is not None and hard.area > 0
        easy = None if hard is None else 1 - hard.labels
        rows.append({
            "case_id": record.case_id,
            "slice_index": record.slice_index,
            "dice": dice(expert, predicted),
            "hd95_mm": safe_hd95(expert, predicted, expert.spacing_mm),
            "hard_dice": region_dice(expert, predicted, hard) if has_hard else float("nan"),
            "easy_dice": region_dice(expert, predicted, easy) if easy is not None else dice(expert, predicted),
            "predicted_pixels": predicted.area,
        })
    return rows


def _nanmean(values: Iterable[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else float("nan")


def aggregate_by_patient(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Mean over each patient's slices, patients in case_id order"""
    grouped: Dict[str, List[Dict[str, Any]]] = {}
    for row in rows:
        grouped.setdefault(row["case_id"], []).append(row)
    patients = []
    for case_id in sorted(grouped):
        slices = grouped[case_id]
        patients.append({
            "case_id": case_id,
            "num_slices": len(slices),
            "dice": _nanmean(r["dice"] for r in slices),
            "hd95_mm": _nanmean(r["hd95_mm"] for r in slices),
            "hard_dice": _nanmean(r["hard_dice"] for r in slices),
            "easy_dice": _nanmean(r["easy_dice"] for r in slices),
        })
    return patients


def summarize_patients(patients: Sequence[Dict[str, Any]]) -> Dict[str, float]:
    return {key: _nanmean(p[key] for p in patients) for key in ("dice", "hd95_mm", "hard_dice", "easy_dice")}


def _single_run(job: Tuple[int, ModelConfig, TrainConfig, List[CaseRecord], List[CaseRecord]]) -> Dict[str, Any]:
    run_index, model_cfg, train_cfg, dataset, test_records = job
    try:
        checkpoint, log = train(model_cfg, train_cfg, dataset)
        model = MicroSegNet(model_cfg, deep_supervision=train_cfg.deep_supervision)
        model.load_state_dict(checkpoint["state_dict"])
        prepared = prepare_records(test_records, model_cfg, train_cfg)
        summary = summarize_patients(aggregate_by_patient(score_records(model, prepared, train_cfg.threshold)))
        return {"success": True, "run_index": run_index, "seed": train_cfg.seed,
                "final_loss": log.loss_curve[-1], **summary}
    except MicroSegNetError as e:
        logger.error(f"[ERROR] Run {run_index} (seed {train_cfg.seed}) failed: {e}")
        return {"success": False, "run_index": run_index, "seed": train_cfg.seed, "message": str(e)}


def multi_run(model_cfg: ModelConfig, train_cfg: TrainConfig, dataset: Sequence[CaseRecord],
              n_runs: Optional[int] = None, test_records: Optional[Sequence[CaseRecord]] = None) -> Dict[str, Any]:
    """Train n_runs models with seeds seed+0..seed+n-1; mean and std of the test metrics"""
    n_runs = n_runs if n_runs is not None else train_cfg.num_runs
    if n_runs < 1:
        raise DatasetError(f"n_runs must be >= 1, got {n_runs}")
    if test_records is None:
        test_records = [r for r in dataset if r.split == "test"]
    test_records = list(test_records)
    if not test_records:
        raise DatasetError("no test records to score the runs on")
    check_no_leakage([r for r in dataset if r.split != "test"], test_records)

    jobs = [(i, model_cfg, train_cfg.model_copy(update={"seed": train_cfg.seed + i}), list(dataset), test_records)
            for i in range(n_runs)]
    if train_cfg.workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=min(train_cfg.workers, n_runs)) as pool:
            runs = list(pool.map(_single_run, jobs))
    else:
        runs = [_single_run(job) for job in jobs]

    completed = [r for r in runs if r["success"]]
    report: Dict[str, Any] = {
        "num_runs": n_runs,
        "completed": len(completed),
        "failed": [r["run_index"] for r in runs if not r["success"]],
        "seeds": [train_cfg.seed + i for i in range(n_runs)],
        "runs": runs,
    }
    for key in ("dice", "hd95_mm", "hard_dice", "easy_dice"):
        values = [r[key] for r in completed if not math.isnan(r[key])]
        report[f"{key}_mean"] = float(np.mean(values)) if values else float("nan")
        report[f"{key}_std"] = float(np.std(values)) if values else float("nan")
    if report["failed"]:
        logger.warning(f"[WARN] {len(report['failed'])}/{n_runs} runs failed: {report['failed']}")
    logger.info(f"[OK] {len(completed)}/{n_runs} runs: dice {report['dice_mean']:.4f} ± {report['dice_std']:.4f}, "
                f"hd95 {report['hd95_mm_mean']:.3f} ± {report['hd95_mm_std']:.3f} mm")
    return report
