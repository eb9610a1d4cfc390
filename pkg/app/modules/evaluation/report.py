"""
Run report: markdown summary rendered from the CSV artifacts of a run directory

Table cells are copied verbatim from the CSV files; nothing is recomputed.
Plots are redrawn from the same CSV values.
"""
import glob
import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

from app.modules.trainer.repository import EPOCH_LOG_NAME, RUNS_NAME, TRAIN_LOG_NAME, read_csv_rows
from app.shared.plotting import plot_ablation_curve, plot_loss_curves
from .repository import ABLATION_NAME, COMPARISON_NAME, OVERLAY_DIR, PATIENT_METRICS_NAME, REPORT_NAME

logger = logging.getLogger(__name__)

NO_DATA = "_no data_"
REPORT_LOSS_PLOT = "report_loss_curve.png"
REPORT_ABLATION_PLOT = "report_ablation.png"


def _table(rows: Sequence[Dict[str, str]], columns: Optional[Sequence[str]] = None) -> List[str]:
    if not rows:
        return [NO_DATA]
    columns = list(columns or rows[0].keys())
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in rows:
        lines.append("| " + " | ".join(row.get(c, "") or "" for c in columns) + " |")
    return lines


def _floats(rows: Sequence[Dict[str, str]], column: str) -> List[float]:
    values = []
    for row in rows:
        try:
            values.append(float(row[column]))
        except (KeyError, TypeError, ValueError):
            values.append(math.nan)
    return values


class _Artifacts:
    """CSV lookups that remember which expected files were missing"""

    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        self.missing: List[str] = []

    def rows(self, name: str) -> Optional[List[Dict[str, str]]]:
        rows = read_csv_rows(os.path.join(self.run_dir, name))
        if rows is None:
            self.missing.append(name)
        return rows


def _training_section(artifacts: _Artifacts) -> Tuple[List[str], List[str]]:
    lines, plots = ["## Training", ""], []
    steps = artifacts.rows(TRAIN_LOG_NAME)
    epochs = artifacts.rows(EPOCH_LOG_NAME)
    if steps:
        lines.append(f"- steps: {len(steps)}")
        lines.append(f"- first loss: {steps[0]['loss']}")
        lines.append(f"- last loss: {steps[-1]['loss']}")
        series = {"loss": _floats(steps, "loss")}
        for head in ("loss_p1", "loss_p2", "loss_p3", "loss_p4"):
            if steps[0].get(head):
                series[head] = _floats(steps, head)
        plots.append(plot_loss_curves(os.path.join(artifacts.run_dir, REPORT_LOSS_PLOT), series))
        lines += ["", f"![loss curve]({REPORT_LOSS_PLOT})", ""]
    lines += _table(epochs or [])
    runs = read_csv_rows(os.path.join(artifacts.run_dir, RUNS_NAME))
    if runs:
        lines += ["", "### Repeated runs", ""] + _table(runs)
    return lines + [""], plots


def _evaluation_section(artifacts: _Artifacts) -> List[str]:
    rows = artifacts.rows(PATIENT_METRICS_NAME)
    return ["## Evaluation", ""] + _table(rows or []) + [""]


def _ablation_section(artifacts: _Artifacts) -> Tuple[List[str], List[str]]:
    rows = artifacts.rows(ABLATION_NAME)
    lines, plots = ["## Ablation (W_hard / W_easy)", ""], []
    if rows:
        plots.append(plot_ablation_curve(
            os.path.join(artifacts.run_dir, REPORT_ABLATION_PLOT),
            _floats(rows, "ratio"), _floats(rows, "dice_mean"), _floats(rows, "hd95_mm_mean"),
            _floats(rows, "dice_std"), _floats(rows, "hd95_mm_std")))
        lines += [f"![ablation]({REPORT_ABLATION_PLOT})", ""]
    return lines + _table(rows or []) + [""], plots


def _comparison_section(artifacts: _Artifacts) -> List[str]:
    rows = artifacts.rows(COMPARISON_NAME)
    return ["## Comparison", ""] + _table(rows or []) + [""]


def _qualitative_section(run_dir: str) -> List[str]:
    overlays = sorted(glob.glob(os.path.join(run_dir, OVERLAY_DIR, "*.png")))
    lines = ["## Qualitative", ""]
    if not overlays:
        return lines + [NO_DATA, ""]
    for path in overlays:
        relative = os.path.relpath(path, run_dir).replace(os.sep, "/")
        lines.append(f"![{os.path.splitext(os.path.basename(path))[0]}]({relative})")
    return lines + [""]


def render_report(run_dir: str) -> Tuple[str, List[str]]:
    """Markdown text plus the plot files drawn for it"""
    artifacts = _Artifacts(run_dir)
    training, plots = _training_section(artifacts)
    ablation, ablation_plots = _ablation_section(artifacts)
    lines = ["# Run report", ""] + training + _evaluation_section(artifacts) + ablation \
        + _comparison_section(artifacts) + _qualitative_section(run_dir)
    lines += ["## Missing artifacts", ""]
    lines += [f"- {name}" for name in artifacts.missing] or ["none"]
    return "\n".join(lines) + "\n", plots + ablation_plots


def report(run_dir: str) -> str:
    """Write report.md into the run directory and return its path"""
    os.makedirs(run_dir, exist_ok=True)
    text, _ = render_report(run_dir)
    path = os.path.join(run_dir, REPORT_NAME)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    logger.info(f"[OK] Report written to {path}")
    return path
