"""
Evaluation Schemas - comparison variants and table layouts
"""
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict


class Variant(BaseModel):
    """A named training configuration to compare"""
    model_config = ConfigDict(frozen=True)

    name: str
    deep_supervision: bool
    w_hard: float
    w_easy: float = 1.0
    reference: str = ""

    def overrides(self) -> Dict[str, object]:
        return {"deep_supervision": self.deep_supervision, "w_hard": self.w_hard, "w_easy": self.w_easy}


# reported Dice / HD95 for the matching configurations, shown as an annotation only
VARIANTS: Dict[str, Variant] = {
    "plain": Variant(name="plain", deep_supervision=False, w_hard=1.0, reference="0.937 / 2.24 mm"),
    "deep-supervision": Variant(name="deep-supervision", deep_supervision=True, w_hard=1.0),
    "microsegnet": Variant(name="microsegnet", deep_supervision=True, w_hard=12.0, reference="0.942 / 2.11 mm"),
}

DEFAULT_RATIOS = (1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 24.0)

SLICE_FIELDS = ["case_id", "slice_index", "dice", "hd95_mm", "hard_dice", "easy_dice"]
PATIENT_FIELDS = ["case_id", "num_slices", "dice", "hd95_mm", "hard_dice", "easy_dice", "threshold"]
ABLATION_FIELDS = ["ratio", "w_hard", "w_easy", "runs", "completed", "complete",
                   "dice_mean", "dice_std", "hd95_mm_mean", "hd95_mm_std", "hard_dice_mean", "easy_dice_mean"]
COMPARISON_FIELDS = ["variant", "deep_supervision", "weight_ratio", "runs", "completed",
                     "dice_mean", "dice_std", "hd95_mm_mean", "hd95_mm_std",
                     "hard_dice_mean", "easy_dice_mean", "hard_dice_delta", "reference"]


class EvaluationSummary(BaseModel):
    num_patients: int
    num_slices: int
    threshold: float
    dice: float
    hd95_mm: float
    hard_dice: float
    easy_dice: float
    empty_predictions: int
    checkpoint_seed: Optional[int] = None
