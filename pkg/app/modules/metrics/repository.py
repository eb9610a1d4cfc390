"""
Metric Repository - per-case metric tables (case_id, slice_index, dice, hd95_mm)
"""
import csv
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Sequence

logger = logging.getLogger(__name__)

CASE_FIELDS = ["case_id", "slice_index", "dice", "hd95_mm"]


def format_value(value: Any) -> str:
    """Stable text form for CSV cells: floats to 6 decimals, NaN as 'nan'"""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6f}"
    return str(value)


def write_metric_table(path: str, rows: Iterable[Dict[str, Any]], fields: Sequence[str] = CASE_FIELDS) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_value(row.get(key, "")) for key in fields})
    return path


def read_metric_table(path: str) -> List[Dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))
