"""
Synthetic Data Services - case generation, annotator simulation, preprocessing

Renders a polar "half-doughnut" sector with a smooth star-convex region,
speckle, calcification spots with acoustic shadows and an indistinct
boundary sector. All randomness of a slice derives from
(seed, case_index, slice_index) so parallel and serial generation agree.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Sequence, Tuple

import cv2
import numpy as np
from scipy.ndimage import distance_transform_edt, gaussian_filter

from app.core.exceptions import ConfigError, GenerationError, ShapeMismatchError
from app.core.types import BinaryMask, CaseRecord, Image2D
from app.shared.image_io import quantize_image
from app.shared.seeding import derive_rng
from .schemas import PerturbParams, SynthParams

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 100

# Fan geometry, as fractions of the image side
FAN_APEX_ROW = -0.10
FAN_INNER_RADIUS = 0.20
FAN_OUTER_RADIUS = 1.05
FAN_HALF_ANGLE_DEG = 50.0

TISSUE_LEVEL = 0.35
REGION_LEVEL = 0.60
SPOT_LEVEL = 0.95


def case_id_for(case_index: int) -> str:
    return f"case_{case_index:03d}"


def polar_angles(shape: Tuple[int, int], center: Tuple[float, float]) -> np.ndarray:
    """Angle in degrees [0, 360) of every pixel around center, counter-clockwise from +column"""
    rows, cols = np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)
    angles = np.degrees(np.arctan2(-(rows - center[0]), cols - center[1]))
    return np.mod(angles, 360.0)


def in_sector(angles: np.ndarray, sector: Tuple[float, float]) -> np.ndarray:
    start, end = sector
    if start <= end:
        return (angles >= start) & (angles <= end)
    return (angles >= start) | (angles <= end)


def signed_distance(mask: np.ndarray) -> np.ndarray:
    """Positive inside, negative outside; |sd| >= 0.5 on every pixel"""
    inside = mask.astype(bool)
    if not inside.any():
        return -np.full(mask.shape, np.inf)
    if inside.all():
        return np.full(mask.shape, np.inf)
    return np.where(inside,
                    distance_transform_edt(inside) - 0.5,
                    -(distance_transform_edt(~inside) - 0.5))


def fan_mask(size: int) -> np.ndarray:
    """Field of view of the rotational sweep: an annular sector below the apex"""
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    apex_row, apex_col = FAN_APEX_ROW * size, (size - 1) / 2.0
    rho = np.hypot(rows - apex_row, cols - apex_col)
    alpha = np.degrees(np.arctan2(cols - apex_col, rows - apex_row))
    return ((rho >= FAN_INNER_RADIUS * size) & (rho <= FAN_OUTER_RADIUS * size)
            & (np.abs(alpha) <= FAN_HALF_ANGLE_DEG))


def _region_shape(params: SynthParams, case_index: int) -> Dict[str, np.ndarray]:
    """Per-patient traits shared by all slices of a case"""
    rng = derive_rng(params.seed, case_index)
    harmonics = np.arange(2, 6)
    return {
        "radius": rng.uniform(0.17, 0.23) * params.image_size,
        "aspect": np.array([rng.uniform(0.75, 0.95), rng.uniform(1.0, 1.2)]),
        "amplitudes": params.shape_irregularity * rng.uniform(0.0, 0.10, size=4) / (harmonics - 1),
        "phases": rng.uniform(0.0, 2 * math.pi, size=4),
        "center": np.array([rng.uniform(0.45, 0.60), rng.uniform(0.45, 0.55)]) * params.image_size,
        "harmonics": harmonics,
    }


def _render_region(size: int, center: np.ndarray, radius: float, shape: Dict[str, np.ndarray]) -> np.ndarray:
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = rows - center[0], cols - center[1]
    phi = np.arctan2(-dy, dx)
    ry, rx = radius * shape["aspect"]
    # ellipse radius along phi, modulated by low-order harmonics
    base = (rx * ry) / np.sqrt((ry * np.cos(phi)) ** 2 + (rx * np.sin(phi)) ** 2)
    modulation = 1.0 + sum(a * np.cos(k * phi + p) for a, k, p in
                           zip(shape["amplitudes"], shape["harmonics"], shape["phases"]))
    return (np.hypot(dy, dx) <= base * modulation).astype(np.uint8)


def _place_region(params: SynthParams, shape: Dict[str, np.ndarray], rng: np.random.Generator,
                  fan: np.ndarray, case_id: str) -> Tuple[np.ndarray, np.ndarray]:
    size = params.image_size
    radius = shape["radius"] * rng.uniform(0.9, 1.05)
    center = shape["center"] + rng.normal(0.0, 0.01 * size, size=2)
    safe_fan = cv2.erode(fan.astype(np.uint8), np.ones((5, 5), np.uint8)).astype(bool)
    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        mask = _render_region(size, center, radius, shape)
        touches_border = mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any()
        if mask.any() and not touches_border and not np.any(mask.astype(bool) & ~safe_fan):
            return mask, center
        center = shape["center"] + rng.normal(0.0, 0.03 * size, size=2)
        if attempt % 25 == 24:
            radius *= 0.95
    raise GenerationError(f"{case_id}: region touches the image border after {MAX_PLACEMENT_ATTEMPTS} attempts")


def _add_artifacts(image: np.ndarray, sd: np.ndarray, fan: np.ndarray, density: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Bright calcification spots, each casting an acoustic shadow away from the probe"""
    size = image.shape[0]
    count = rng.poisson(6.0 * density)
    candidates = np.argwhere((sd > -8.0) & (sd < 12.0) & fan)
    if count == 0 or len(candidates) == 0:
        return image
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    apex_row, apex_col = FAN_APEX_ROW * size, (size - 1) / 2.0
    rho = np.hypot(rows - apex_row, cols - apex_col)
    alpha = np.arctan2(cols - apex_col, rows - apex_row)
    for _ in range(count):
        r, c = candidates[rng.integers(len(candidates))]
        spot_radius = rng.uniform(1.5, 3.0)
        spot_rho = math.hypot(r - apex_row, c - apex_col)
        spot_alpha = math.atan2(c - apex_col, r - apex_row)
        half_width = 1.5 * math.atan2(spot_radius, spot_rho)
        shadow = (rho > spot_rho + spot_radius) & (np.abs(alpha - spot_alpha) < half_width)
        image = np.where(shadow, image * rng.uniform(0.25, 0.5), image)
        spot = np.hypot(rows - r, cols - c) <= spot_radius
        image = np.where(spot, SPOT_LEVEL, image)
    return image


def _add_speckle(image: np.ndarray, level: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative Rayleigh speckle plus a little additive noise"""
    speckle = rng.rayleigh(scale=1.0 / math.sqrt(math.pi / 2.0), size=image.shape)
    speckle = gaussian_filter(speckle, sigma=0.7)
    speckle /= speckle.mean()
    image = image * (1.0 + level * (speckle - 1.0))
    return image + rng.normal(0.0, 0.03 * level, size=image.shape)


def generate_case(params: SynthParams, case_index: int, slice_index: int = 0) -> CaseRecord:
    """Render one slice; the non-expert annotation is left empty"""
    if case_index < 0 or case_index >= params.num_cases:
        raise GenerationError(f"case_index {case_index} outside [0, {params.num_cases})")
    size = params.image_size
    case_id = case_id_for(case_index)
    rng = derive_rng(params.seed, case_index, slice_index)
    shape = _region_shape(params, case_index)
    fan = fan_mask(size)

    mask, center = _place_region(params, shape, rng, fan, case_id)
    sd = signed_distance(mask)

    angles = polar_angles((size, size), tuple(center))
    width = np.where(in_sector(angles, params.boundary_blur_sector), params.blur_width_px, 0.35)
    blend = 1.0 / (1.0 + np.exp(-sd / width))
    image = TISSUE_LEVEL + (REGION_LEVEL - TISSUE_LEVEL) * blend

    if params.noise_level > 0:
        texture = gaussian_filter(rng.standard_normal((size, size)), sigma=6.0)
        texture /= texture.std() or 1.0
        image = image + 0.05 * params.noise_level * texture
        depth = np.clip(np.arange(size, dtype=np.float64) / size, 0.0, 1.0)[:, None]
        image = image * (1.0 - 0.3 * params.noise_level * depth)
    if params.artifact_density > 0:
        image = _add_artifacts(image, sd, fan, params.artifact_density, rng)
    if params.noise_level > 0:
        image = _add_speckle(image, params.noise_level, rng)

    image = quantize_image(np.where(fan, image, 0.0))
    spacing = tuple(float(s) for s in params.spacing_mm)
    return CaseRecord(
        image=Image2D(pixels=image, spacing_mm=spacing, case_id=case_id, slice_index=slice_index),
        expert_mask=BinaryMask(labels=mask, spacing_mm=spacing),
        case_id=case_id,
        slice_index=slice_index,
    )


def _generate_slice(job: Tuple[SynthParams, int, int]) -> CaseRecord:
    params, case_index, slice_index = job
    return generate_case(params, case_index, slice_index)


def generate_dataset(params: SynthParams, workers: int = 1) -> List[CaseRecord]:
    """All cases x slices in (case, slice) order; identical for any worker count"""
    jobs = [(params, c, s) for c in range(params.num_cases) for s in range(params.slices_per_case)]
    logger.info(f"[*] Generating {params.num_cases} cases x {params.slices_per_case} slices (workers={workers})")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            records = list(executor.map(_generate_slice, jobs, chunksize=4))
    else:
        records = [_generate_slice(job) for job in jobs]
    logger.info(f"[OK] Generated {len(records)} slices")
    return records


def simulate_nonexpert(expert: BinaryMask, params: PerturbParams) -> BinaryMask:
    """Displace the expert boundary along its normal by a smooth random field.

    The displacement is scaled by hard_sector_gain inside the sector (angles
    measured around the expert centroid), mimicking indistinct borders.
    """
    labels = expert.labels
    if not np.any(labels):
        raise GenerationError("simulate_nonexpert requires a non-empty expert mask")
    if params.amplitude_px == 0:
        return BinaryMask(labels=labels.copy(), spacing_mm=expert.spacing_mm)

    rng = derive_rng(params.seed)
    field = gaussian_filter(rng.standard_normal(labels.shape), sigma=params.correlation_len_px, mode="reflect")
    std = field.std()
    field = field / std if std > 0 else field

    centroid = np.argwhere(labels).mean(axis=0)
    gain = np.where(in_sector(polar_angles(labels.shape, tuple(centroid)), params.sector_deg),
                    params.hard_sector_gain, 1.0)
    displacement = params.amplitude_px * field * gain

    # the zero level set of sd + d is the boundary moved outward by d
    perturbed = (signed_distance(labels) + displacement) > 0
    return BinaryMask(labels=perturbed.astype(np.uint8), spacing_mm=expert.spacing_mm)


def assign_splits(case_ids: Sequence[str], n_test: int, seed: int = 0) -> Dict[str, str]:
    """Patient-level train/test split, deterministic in seed"""
    unique = sorted(set(case_ids))
    if not 0 <= n_test < len(unique):
        raise ConfigError(f"n_test must lie in [0, {len(unique)}), got {n_test}")
    order = derive_rng(seed, 1).permutation(len(unique))
    test_ids = {unique[i] for i in order[:n_test]}
    return {case_id: ("test" if case_id in test_ids else "train") for case_id in unique}


def preprocess(image: Image2D, target: int) -> Image2D:
    """Bilinear resize to target x target, then min-max normalize to [0, 1]"""
    if target < 8:
        raise ConfigError(f"target size must be >= 8, got {target}")
    pixels = image.pixels.astype(np.float32)
    height, width = pixels.shape
    if (height, width) != (target, target):
        pixels = cv2.resize(pixels, (target, target), interpolation=cv2.INTER_LINEAR)
    spacing = (image.spacing_mm[0] * height / target, image.spacing_mm[1] * width / target)

    lo, hi = float(pixels.min()), float(pixels.max())
    if hi <= lo:
        logger.warning(f"[WARN] Constant image {image.case_id}/slice_{image.slice_index} - returning zeros")
        pixels = np.zeros((target, target), dtype=np.float32)
    else:
        pixels = ((pixels - lo) / (hi - lo)).astype(np.float32)
    return Image2D(pixels=pixels, spacing_mm=spacing, case_id=image.case_id, slice_index=image.slice_index)


def downsample_mask(mask: BinaryMask, factor: int) -> BinaryMask:
    """Nearest-neighbour subsampling keeping the top-left pixel of each block"""
    if factor not in (2, 4, 8):
        raise ConfigError(f"factor must be one of 2, 4, 8, got {factor}")
    height, width = mask.shape
    if height % factor or width % factor:
        raise ShapeMismatchError(f"mask shape {mask.shape} not divisible by {factor}")
    spacing = (mask.spacing_mm[0] * factor, mask.spacing_mm[1] * factor)
    return BinaryMask(labels=mask.labels[::factor, ::factor], spacing_mm=spacing)


def resize_mask(mask: BinaryMask, target: int) -> BinaryMask:
    """Nearest-neighbour resize to target x target"""
    height, width = mask.shape
    if (height, width) == (target, target):
        return mask
    labels = cv2.resize(mask.labels.astype(np.uint8), (target, target), interpolation=cv2.INTER_NEAREST)
    spacing = (mask.spacing_mm[0] * height / target, mask.spacing_mm[1] * width / target)
    return BinaryMask(labels=labels, spacing_mm=spacing)
