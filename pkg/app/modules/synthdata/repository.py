"""
Synthetic Data Repository - Data Access Layer
Reads and writes the on-disk dataset: one directory per case with PNG
slices plus a JSON manifest carrying spacing, splits and generator params
"""
import json
import logging
import os
from collections import Counter, OrderedDict
from typing import Any, Dict, Iterable, List, Optional

from marshmallow import ValidationError

from app.core.config import DATASET_FORMAT
from app.core.exceptions import DatasetError
from app.core.types import BinaryMask, CaseRecord, Image2D
from app.shared.image_io import load_image_png, load_mask_png, save_image_png, save_mask_png
from .schemas import ManifestSchema

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def slice_file_names(slice_index: int) -> Dict[str, str]:
    prefix = f"slice_{slice_index}"
    return {
        "image": f"{prefix}_img.png",
        "expert": f"{prefix}_expert.png",
        "nonexpert": f"{prefix}_nonexpert.png",
        "hard": f"{prefix}_hard.png",
    }


def read_manifest(root: str) -> Dict[str, Any]:
    """Load and validate manifest.json"""
    path = os.path.join(root, MANIFEST_NAME)
    if not os.path.isfile(path):
        raise DatasetError(f"manifest not found at {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"corrupt manifest {path}: {e}") from e
    try:
        return ManifestSchema().load(raw)
    except ValidationError as e:
        case_id = _offending_case(raw, e.messages)
        raise DatasetError(f"corrupt manifest {path}: {e.messages}", case_id=case_id) from e


def _offending_case(raw: Any, messages: Dict[str, Any]) -> Optional[str]:
    cases = messages.get("cases") if isinstance(messages, dict) else None
    if not isinstance(cases, dict) or not isinstance(raw, dict):
        return None
    for index in cases:
        try:
            return raw["cases"][int(index)].get("case_id")
        except (KeyError, IndexError, TypeError, ValueError, AttributeError):
            continue
    return None


def write_manifest(root: str, manifest: Dict[str, Any]) -> str:
    path = os.path.join(root, MANIFEST_NAME)
    payload = ManifestSchema().dump(manifest)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def write_dataset(records: Iterable[CaseRecord], root: str, splits: Optional[Dict[str, str]] = None,
                  params: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Write records as PNG slices plus manifest; returns a summary"""
    os.makedirs(root, exist_ok=True)
    cases: "OrderedDict[str, Dict[str, Any]]" = OrderedDict()
    for record in records:
        split = (splits or {}).get(record.case_id) or record.split or "train"
        entry = cases.setdefault(record.case_id, {"case_id": record.case_id, "split": split, "slices": []})
        if entry["split"] != split:
            raise DatasetError(f"slices disagree on split ({entry['split']} vs {split})", case_id=record.case_id)

        case_dir = os.path.join(root, record.case_id)
        names = slice_file_names(record.slice_index)
        save_image_png(os.path.join(case_dir, names["image"]), record.image.pixels)
        save_mask_png(os.path.join(case_dir, names["expert"]), record.expert_mask.labels)
        slice_entry = {
            "slice_index": record.slice_index,
            "spacing_mm": [float(s) for s in record.image.spacing_mm],
            "image": names["image"],
            "expert": names["expert"],
            "nonexpert": None,
            "hard": None,
        }
        if record.nonexpert_mask is not None:
            save_mask_png(os.path.join(case_dir, names["nonexpert"]), record.nonexpert_mask.labels)
            slice_entry["nonexpert"] = names["nonexpert"]
        if record.hard_mask is not None:
            save_mask_png(os.path.join(case_dir, names["hard"]), record.hard_mask.labels)
            slice_entry["hard"] = names["hard"]
        entry["slices"].append(slice_entry)

    manifest = {"format": DATASET_FORMAT, "params": params or {}, "cases": list(cases.values())}
    write_manifest(root, manifest)

    split_counts = Counter(entry["split"] for entry in cases.values())
    summary = {
        "root": root,
        "num_cases": len(cases),
        "num_slices": sum(len(entry["slices"]) for entry in cases.values()),
        "splits": dict(sorted(split_counts.items())),
    }
    logger.info(f"[OK] Wrote dataset to {root}: {summary['num_cases']} cases, {summary['num_slices']} slices")
    return summary


def _load_mask(path: str, case_id: str, shape, spacing) -> BinaryMask:
    if not os.path.isfile(path):
        raise DatasetError(f"missing file {path}", case_id=case_id)
    labels = load_mask_png(path)
    if labels.shape != shape:
        raise DatasetError(f"shape mismatch: {os.path.basename(path)} is {labels.shape}, image is {shape}",
                           case_id=case_id)
    return BinaryMask(labels=labels, spacing_mm=spacing)


def load_dataset(root: str, split: Optional[str] = None) -> List[CaseRecord]:
    """Load every slice listed in the manifest (optionally one split only)"""
    manifest = read_manifest(root)
    records: List[CaseRecord] = []
    for entry in manifest["cases"]:
        if split is not None and entry["split"] != split:
            continue
        case_id = entry["case_id"]
        case_dir = os.path.join(root, case_id)
        for slice_entry in entry["slices"]:
            spacing = tuple(float(s) for s in slice_entry["spacing_mm"])
            image_path = os.path.join(case_dir, slice_entry["image"])
            if not os.path.isfile(image_path):
                raise DatasetError(f"missing file {image_path}", case_id=case_id)
            pixels = load_image_png(image_path)
            shape = pixels.shape

            expert = _load_mask(os.path.join(case_dir, slice_entry["expert"]), case_id, shape, spacing)
            nonexpert = hard = None
            if slice_entry.get("nonexpert"):
                nonexpert = _load_mask(os.path.join(case_dir, slice_entry["nonexpert"]), case_id, shape, spacing)
            if slice_entry.get("hard"):
                hard = _load_mask(os.path.join(case_dir, slice_entry["hard"]), case_id, shape, spacing)

            records.append(CaseRecord(
                image=Image2D(pixels=pixels, spacing_mm=spacing, case_id=case_id,
                              slice_index=slice_entry["slice_index"]),
                expert_mask=expert,
                nonexpert_mask=nonexpert,
                hard_mask=hard,
                case_id=case_id,
                slice_index=slice_entry["slice_index"],
                split=entry["split"],
            ))
    logger.info(f"[OK] Loaded {len(records)} slices from {root}" + (f" (split={split})" if split else ""))
    return records


def split_case_ids(root: str) -> Dict[str, List[str]]:
    """case_ids grouped by split, straight from the manifest"""
    grouped: Dict[str, List[str]] = {}
    for entry in read_manifest(root)["cases"]:
        grouped.setdefault(entry["split"], []).append(entry["case_id"])
    return grouped

