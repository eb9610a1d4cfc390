"""
Synthetic Data Schemas - parameter models and manifest validation
"""
from typing import Tuple

from marshmallow import Schema, fields, validate
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.config import DATASET_FORMAT, DEFAULT_SPACING_MM

SPLITS = ("train", "val", "test")


def _check_sector(sector: Tuple[float, float]) -> None:
    start, end = sector
    if not (0.0 <= start < 360.0 and 0.0 <= end < 360.0) or start == end:
        raise ValueError(f"sector must be two distinct angles in [0, 360), got {sector}")


class SynthParams(BaseModel):
    """Parameters of the micro-ultrasound-like case generator"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    num_cases: int = 40
    slices_per_case: int = 6
    image_size: int = 224
    shape_irregularity: float = 0.5
    artifact_density: float = 0.3
    # degrees, counter-clockwise from the +column axis around the region centre
    boundary_blur_sector: Tuple[float, float] = (15.0, 165.0)
    blur_width_px: float = 3.0
    noise_level: float = 0.3
    spacing_mm: Tuple[float, float] = DEFAULT_SPACING_MM
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.num_cases < 1 or self.slices_per_case < 1:
            raise ValueError("num_cases and slices_per_case must be >= 1")
        if self.image_size < 32:
            raise ValueError("image_size must be >= 32")
        for name in ("shape_irregularity", "artifact_density", "noise_level"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.blur_width_px <= 0 or min(self.spacing_mm) <= 0:
            raise ValueError("blur_width_px and spacing_mm must be positive")
        _check_sector(self.boundary_blur_sector)
        return self


class PerturbParams(BaseModel):
    """Parameters of the simulated non-expert annotator"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    amplitude_px: float = 3.0
    correlation_len_px: float = 12.0
    hard_sector_gain: float = 3.0
    sector_deg: Tuple[float, float] = (15.0, 165.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.amplitude_px < 0:
            raise ValueError("amplitude_px must be >= 0")
        if self.correlation_len_px <= 0:
            raise ValueError("correlation_len_px must be > 0")
        if self.hard_sector_gain < 1:
            raise ValueError("hard_sector_gain must be >= 1")
        _check_sector(self.sector_deg)
        return self


class SliceEntrySchema(Schema):
    """Schema for one slice entry of the dataset manifest"""
    slice_index = fields.Int(required=True, validate=validate.Range(min=0))
    spacing_mm = fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)),
                             required=True, validate=validate.Length(equal=2))
    image = fields.Str(required=True)
    expert = fields.Str(required=True)
    nonexpert = fields.Str(allow_none=True, load_default=None)
    hard = fields.Str(allow_none=True, load_default=None)


class CaseEntrySchema(Schema):
    """Schema for one patient entry of the dataset manifest"""
    case_id = fields.Str(required=True, validate=validate.Length(min=1))
    split = fields.Str(required=True, validate=validate.OneOf(SPLITS))
    slices = fields.List(fields.Nested(SliceEntrySchema), required=True)


class ManifestSchema(Schema):
    """Schema for manifest.json at the dataset root"""
    format = fields.Str(required=True, validate=validate.Equal(DATASET_FORMAT))
    params = fields.Dict(load_default=dict)
    cases = fields.List(fields.Nested(CaseEntrySchema), required=True)
