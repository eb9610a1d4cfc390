"""
Trainer Repository - training log and multi-run CSV files
"""
import csv
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence

from .schemas import TrainingLog

logger = logging.getLogger(__name__)

TRAIN_LOG_NAME = "train_log.csv"
EPOCH_LOG_NAME = "epoch_log.csv"
RUNS_NAME = "runs.csv"
CHECKPOINT_NAME = "checkpoint.pt"

STEP_FIELDS = ["step", "epoch", "loss", "loss_p1", "loss_p2", "loss_p3", "loss_p4"]
EPOCH_FIELDS = ["epoch", "mean_loss", "val_dice"]
RUN_FIELDS = ["run_index", "seed", "success", "dice", "hd95_mm", "hard_dice", "easy_dice", "final_loss", "message"]


def _cell(value: Any) -> str:
    """Floats at full precision (repr); None becomes an empty cell"""
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _write(path: str, fields: Sequence[str], rows: Sequence[Dict[str, Any]]) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_cell(row.get(field)) for field in fields])
    return path


def write_training_log(path: str, log: TrainingLog) -> str:
    """step, epoch, loss, loss_p1..loss_p4 (p2..p4 empty without deep supervision)"""
    return _write(path, STEP_FIELDS, [s.model_dump() for s in log.steps])


def write_epoch_log(path: str, log: TrainingLog) -> str:
    return _write(path, EPOCH_FIELDS, [e.model_dump() for e in log.epochs])


def write_runs_table(path: str, report: Dict[str, Any]) -> str:
    """One row per run, then mean and std rows"""
    rows: List[Dict[str, Any]] = list(report["runs"])
    for stat in ("mean", "std"):
        rows.append({"run_index": stat, **{key: report[f"{key}_{stat}"]
                                           for key in ("dice", "hd95_mm", "hard_dice", "easy_dice")}})
    return _write(path, RUN_FIELDS, rows)


def read_csv_rows(path: str) -> Optional[List[Dict[str, str]]]:
    """Rows of a CSV artifact, or None when the file does not exist"""
    if not os.path.isfile(path):
        return None
    with open(path, "r", newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))
