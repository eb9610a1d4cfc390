"""
Evaluation Repository - metric, ablation and comparison tables in the run directory
"""
import logging
import os
from typing import Any, Dict, List, Sequence

from app.modules.metrics.repository import write_metric_table
from .schemas import ABLATION_FIELDS, COMPARISON_FIELDS, PATIENT_FIELDS, SLICE_FIELDS, EvaluationSummary

logger = logging.getLogger(__name__)

SLICE_METRICS_NAME = "metrics_slices.csv"
PATIENT_METRICS_NAME = "metrics_patients.csv"
ABLATION_NAME = "ablation.csv"
ABLATION_PLOT_NAME = "ablation.png"
COMPARISON_NAME = "comparison.csv"
OVERLAY_DIR = "overlays"
REPORT_NAME = "report.md"


def write_evaluation(run_dir: str, result: Dict[str, Any]) -> List[str]:
    """Per-slice table and per-patient table closed by a mean row"""
    summary: EvaluationSummary = result["summary"]
    mean_row = {"case_id": "mean", "num_slices": summary.num_slices, "dice": summary.dice,
                "hd95_mm": summary.hd95_mm, "hard_dice": summary.hard_dice, "easy_dice": summary.easy_dice,
                "threshold": summary.threshold}
    return [
        write_metric_table(os.path.join(run_dir, SLICE_METRICS_NAME), result["slices"], SLICE_FIELDS),
        write_metric_table(os.path.join(run_dir, PATIENT_METRICS_NAME), result["patients"] + [mean_row],
                           PATIENT_FIELDS),
    ]


def write_ablation(run_dir: str, rows: Sequence[Dict[str, Any]]) -> str:
    return write_metric_table(os.path.join(run_dir, ABLATION_NAME), rows, ABLATION_FIELDS)


def write_comparison(run_dir: str, rows: Sequence[Dict[str, Any]]) -> str:
    return write_metric_table(os.path.join(run_dir, COMPARISON_NAME), rows, COMPARISON_FIELDS)
