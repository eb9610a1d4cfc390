"""
PNG storage for images and masks

Images are stored as 8-bit grayscale; masks as 0/255 8-bit grayscale.
"""
import os

import numpy as np
from PIL import Image


def quantize_image(pixels: np.ndarray) -> np.ndarray:
    """Round [0, 1] intensities onto the 8-bit grid used on disk"""
    codes = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    return codes.astype(np.float32) / np.float32(255.0)


def save_image_png(path: str, pixels: np.ndarray) -> None:
    codes = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    Image.fromarray(codes, mode="L").save(path, format="PNG")


def load_image_png(path: str) -> np.ndarray:
    with Image.open(path) as img:
        codes = np.asarray(img.convert("L"), dtype=np.uint8)
    return codes.astype(np.float32) / np.float32(255.0)


def save_mask_png(path: str, labels: np.ndarray) -> None:
    codes = (np.asarray(labels) != 0).astype(np.uint8) * 255
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    Image.fromarray(codes, mode="L").save(path, format="PNG")


def load_mask_png(path: str) -> np.ndarray:
    with Image.open(path) as img:
        codes = np.asarray(img.convert("L"), dtype=np.uint8)
    return (codes >= 128).astype(np.uint8)
