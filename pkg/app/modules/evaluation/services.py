"""
Evaluation Services - checkpoint evaluation, weight-ratio ablation,
variant comparison and the markdown run report
"""
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Union

from app.core.config import ModelConfig, TrainConfig
from app.core.exceptions import ConfigError, DatasetError, InvalidWeightsError
from app.core.types import CaseRecord
from app.modules.model.repository import Checkpoint, load_checkpoint
from app.modules.model.services import predict_probabilities
from app.modules.metrics.services import binarize
from app.modules.trainer.services import (aggregate_by_patient, multi_run, prepare_records, score_records,
                                          summarize_patients)
from app.shared.plotting import plot_overlay
from .schemas import DEFAULT_RATIOS, VARIANTS, EvaluationSummary, Variant

logger = logging.getLogger(__name__)


def evaluate(checkpoint: Union[str, Checkpoint], records: Sequence[CaseRecord], threshold: Optional[float] = None,
             expected_config: Optional[ModelConfig] = None, overlay_dir: Optional[str] = None,
             max_overlays: int = 4) -> Dict[str, Any]:
    """Per-slice and per-patient Dice / HD95 plus the mean row"""
    if not records:
        raise DatasetError("evaluation split is empty")
    model, train_cfg, payload = load_checkpoint(checkpoint, expected=expected_config)
    threshold = train_cfg.threshold if threshold is None else threshold
    prepared = prepare_records(records, model.config, train_cfg)
    prepared.sort(key=lambda r: (r.case_id, r.slice_index))

    slices = score_records(model, prepared, threshold)
    patients = aggregate_by_patient(slices)
    means = summarize_patients(patients)
    empty = sum(1 for row in slices if row["predicted_pixels"] == 0)
    if empty:
        logger.warning(f"[WARN] {empty} slices have an empty prediction; their HD95 is undefined (nan)")

    overlays = []
    if overlay_dir and max_overlays > 0:
        overlays = render_overlays(model, prepared[:max_overlays], threshold, overlay_dir)

    summary = EvaluationSummary(
        num_patients=len(patients),
        num_slices=len(slices),
        threshold=threshold,
        empty_predictions=empty,
        checkpoint_seed=payload.get("metadata", {}).get("seed"),
        **means,
    )
    logger.info(f"[OK] Evaluated {summary.num_patients} patients: dice {summary.dice:.4f}, "
                f"hd95 {summary.hd95_mm:.3f} mm, hard dice {summary.hard_dice:.4f}")
    return {
        "slices": slices,
        "patients": [dict(p, threshold=threshold) for p in patients],
        "summary": summary,
        "overlays": overlays,
    }


def render_overlays(model, records: Sequence[CaseRecord], threshold: float, directory: str) -> List[str]:
    probs = predict_probabilities(model, [r.image for r in records])
    paths = []
    for record, prob in zip(records, probs):
        predicted = binarize(prob, threshold)
        path = os.path.join(directory, f"{record.case_id}_slice_{record.slice_index}.png")
        hard = record.hard_mask.labels if record.hard_mask is not None else None
        paths.append(plot_overlay(path, record.image.pixels, record.expert_mask.labels, predicted.labels,
                                  hard, title=record.key))
    return paths


def _metric_columns(report: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "runs": report["num_runs"],
        "completed": report["completed"],
        "dice_mean": report["dice_mean"],
        "dice_std": report["dice_std"],
        "hd95_mm_mean": report["hd95_mm_mean"],
        "hd95_mm_std": report["hd95_mm_std"],
        "hard_dice_mean": report["hard_dice_mean"],
        "easy_dice_mean": report["easy_dice_mean"],
    }


def ablate_weight_ratio(model_cfg: ModelConfig, train_cfg: TrainConfig, dataset: Sequence[CaseRecord],
                        ratios: Sequence[float] = DEFAULT_RATIOS, runs_per_ratio: int = 1,
                        test_records: Optional[Sequence[CaseRecord]] = None) -> List[Dict[str, Any]]:
    """Mean Dice / HD95 for each W_hard / W_easy ratio (w_easy = 1)"""
    bad = [r for r in ratios if not r >= 1.0]
    if bad:
        raise InvalidWeightsError(f"weight ratios must be >= 1, got {bad}")
    rows = []
    for ratio in ratios:
        logger.info(f"[*] Ablation ratio {ratio:g} ({runs_per_ratio} runs)")
        cfg = train_cfg.model_copy(update={"w_hard": float(ratio), "w_easy": 1.0})
        report = multi_run(model_cfg, cfg, dataset, n_runs=runs_per_ratio, test_records=test_records)
        complete = report["completed"] == runs_per_ratio
        if not complete:
            logger.warning(f"[WARN] Ratio {ratio:g} incomplete: runs {report['failed']} failed")
        rows.append({"ratio": float(ratio), "w_hard": float(ratio), "w_easy": 1.0, "complete": complete,
                     **_metric_columns(report)})
    return rows


def resolve_variants(variants: Sequence[Union[str, Variant]]) -> List[Variant]:
    resolved = []
    for variant in variants:
        if isinstance(variant, Variant):
            resolved.append(variant)
        elif variant in VARIANTS:
            resolved.append(VARIANTS[variant])
        else:
            raise ConfigError(f"Unknown variant '{variant}' (available: {', '.join(VARIANTS)})")
    if len(resolved) < 2:
        raise ConfigError(f"comparison needs at least 2 variants, got {len(resolved)}")
    return resolved


def compare_variants(model_cfg: ModelConfig, train_cfg: TrainConfig, dataset: Sequence[CaseRecord],
                     variants: Sequence[Union[str, Variant]] = tuple(VARIANTS), runs: int = 1,
                     test_records: Optional[Sequence[CaseRecord]] = None) -> List[Dict[str, Any]]:
    """One row per variant; hard_dice_delta is relative to the first variant"""
    rows = []
    for variant in resolve_variants(variants):
        logger.info(f"[*] Variant {variant.name}")
        cfg = train_cfg.model_copy(update=variant.overrides())
        report = multi_run(model_cfg, cfg, dataset, n_runs=runs, test_records=test_records)
        rows.append({"variant": variant.name, "deep_supervision": variant.deep_supervision,
                     "weight_ratio": variant.w_hard / variant.w_easy, "reference": variant.reference,
                     **_metric_columns(report)})
    baseline = rows[0]["hard_dice_mean"]
    for row in rows:
        row["hard_dice_delta"] = row["hard_dice_mean"] - baseline
    return rows
