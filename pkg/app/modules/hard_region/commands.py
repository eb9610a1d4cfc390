"""
Hard Region Commands
hard-mask: derive and cache hard masks for a dataset, report hard-area fractions
"""
import logging
import os

import numpy as np

from app.core.exceptions import DatasetError
from app.shared.command_utils import command_handler, run_dir
from app.shared.run_manifest import record_artifacts
from app.modules.synthdata.repository import load_dataset
from .repository import save_hard_masks, write_hard_fraction_report
from .services import compute_hard_mask, hard_fraction

logger = logging.getLogger(__name__)


def register_hard_region_commands(subparsers, common):
    parser = subparsers.add_parser("hard-mask", parents=[common], help="Derive hard-region masks")
    parser.add_argument("--dataset", required=True, help="dataset root containing manifest.json")
    parser.add_argument("--dilate-px", type=int, default=0)
    parser.set_defaults(handler=hard_mask_command)


@command_handler
def hard_mask_command(args):
    records = load_dataset(args.dataset)
    hard_masks, rows = {}, []
    for record in records:
        if record.nonexpert_mask is None:
            raise DatasetError("no non-expert annotation to compare against", case_id=record.case_id)
        hard = compute_hard_mask(record.expert_mask, record.nonexpert_mask, dilate_px=args.dilate_px)
        hard_masks[(record.case_id, record.slice_index)] = hard
        rows.append({
            "case_id": record.case_id,
            "slice_index": record.slice_index,
            "hard_pixels": int(np.count_nonzero(hard.labels)),
            "total_pixels": int(hard.labels.size),
            "hard_fraction": f"{hard_fraction(hard):.6f}",
        })

    written = save_hard_masks(args.dataset, hard_masks)
    out = run_dir(args)
    report = write_hard_fraction_report(os.path.join(out, "hard_fractions.csv"), rows)
    record_artifacts(out, "hard-mask", [report])
    mean_fraction = float(np.mean([float(r["hard_fraction"]) for r in rows])) if rows else 0.0
    logger.info(f"[OK] {len(written)} hard masks, mean hard fraction {mean_fraction:.4f}")
    return 0
