"""
Matplotlib rendering helpers (headless, byte-stable PNG output)
"""
import os
from typing import Dict, List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": None}

COLORS = {
    'expert': '#2ca02c',
    'prediction': '#d62728',
    'hard': '#ff7f0e',
    'line': '#1f77b4',
    'accent': '#9467bd',
}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_loss_curves(path: str, series: Dict[str, Sequence[float]], xlabel: str = "step") -> str:
    """One line per named series"""
    fig, ax = plt.subplots(1, 1, figsize=(7, 4))
    for name in sorted(series):
        values = series[name]
        ax.plot(np.arange(1, len(values) + 1), values, label=name, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_ablation_curve(path: str, ratios: List[float], dice: List[float], hd95: List[float],
                        dice_std: Optional[List[float]] = None, hd95_std: Optional[List[float]] = None) -> str:
    """Dice and HD95 against the hard/easy weight ratio"""
    fig, (ax_dice, ax_hd) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_dice.errorbar(ratios, dice, yerr=dice_std, marker="o", color=COLORS['line'], capsize=3)
    ax_dice.set_xlabel("W_hard / W_easy")
    ax_dice.set_ylabel("Dice")
    ax_hd.errorbar(ratios, hd95, yerr=hd95_std, marker="s", color=COLORS['accent'], capsize=3)
    ax_hd.set_xlabel("W_hard / W_easy")
    ax_hd.set_ylabel("HD95 (mm)")
    for ax in (ax_dice, ax_hd):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_overlay(path: str, image: np.ndarray, expert: np.ndarray, prediction: np.ndarray,
                 hard: Optional[np.ndarray] = None, title: str = "") -> str:
    """Expert vs predicted contour on the grayscale image, hard region shaded"""
    fig, ax = plt.subplots(1, 1, figsize=(4, 4))
    ax.imshow(image, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
    if hard is not None and np.any(hard):
        shade = np.ma.masked_where(hard == 0, hard)
        ax.imshow(shade, cmap="autumn", alpha=0.45, interpolation="nearest")
    if np.any(expert):
        ax.contour(expert.astype(float), levels=[0.5], colors=[COLORS['expert']], linewidths=1.2)
    if np.any(prediction):
        ax.contour(prediction.astype(float), levels=[0.5], colors=[COLORS['prediction']], linewidths=1.2)
    ax.set_title(title, fontsize=9)
    ax.axis('off')
    fig.tight_layout()
    return _save(fig, path)
