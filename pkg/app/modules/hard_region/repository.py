"""
Hard Region Repository - Data Access Layer
Caches hard masks next to the slices and writes the hard-area report.
Weight maps are not stored: they depend on the training weights and are
derived on load by derive_region_artifacts.
"""
import csv
import logging
import os
from typing import Dict, List

from app.core.types import BinaryMask
from app.shared.image_io import save_mask_png
from app.modules.synthdata.repository import read_manifest, slice_file_names, write_manifest

logger = logging.getLogger(__name__)

REPORT_FIELDS = ["case_id", "slice_index", "hard_pixels", "total_pixels", "hard_fraction"]


def save_hard_masks(root: str, hard_masks: Dict[tuple, BinaryMask]) -> List[str]:
    """Write slice_{k}_hard.png for every (case_id, slice_index) and register them in the manifest"""
    manifest = read_manifest(root)
    written = []
    for entry in manifest["cases"]:
        for slice_entry in entry["slices"]:
            key = (entry["case_id"], slice_entry["slice_index"])
            if key not in hard_masks:
                continue
            name = slice_file_names(slice_entry["slice_index"])["hard"]
            path = os.path.join(root, entry["case_id"], name)
            save_mask_png(path, hard_masks[key].labels)
            slice_entry["hard"] = name
            written.append(path)
    write_manifest(root, manifest)
    logger.info(f"[OK] Cached {len(written)} hard masks under {root}")
    return written


def write_hard_fraction_report(path: str, rows: List[Dict]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=REPORT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path
