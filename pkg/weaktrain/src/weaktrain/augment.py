"""Paired image/mask augmentation.

Intensity: one transform per sample chosen from color jitter, posterization,
histogram equalization, or identity, applied to the RGB image only. Geometry:
a rotation angle drawn uniformly from [0, 2*pi) applied to both the image
(bilinear) and the mask (nearest neighbor, so mask values stay binary).
Angles that are exact quarter turns take the lossless array-rotation path.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torchvision.transforms.functional as TF
from torchvision.transforms import InterpolationMode

from .config import TrainConfig

_QUARTER = math.pi / 2.0


def _quarter_turns(angle_rad: float) -> int | None:
    """Number of CCW quarter turns if the angle is one exactly, else None."""
    k = angle_rad / _QUARTER
    k_round = round(k)
    if abs(k - k_round) < 1e-12:
        return k_round % 4
    return None


def rotate_rgb(rgb: torch.Tensor, angle_rad: float) -> torch.Tensor:
    k = _quarter_turns(angle_rad)
    if k is not None:
        return torch.rot90(rgb, k, dims=(-2, -1))
    return TF.rotate(
        rgb, math.degrees(angle_rad), interpolation=InterpolationMode.BILINEAR, fill=0
    )


def rotate_mask(mask: torch.Tensor, angle_rad: float) -> torch.Tensor:
    k = _quarter_turns(angle_rad)
    if k is not None:
        return torch.rot90(mask, k, dims=(-2, -1))
    return TF.rotate(
        mask, math.degrees(angle_rad), interpolation=InterpolationMode.NEAREST, fill=0
    )


def _color_jitter(rgb: torch.Tensor, rng: np.random.Generator) -> torch.Tensor:
    out = TF.adjust_brightness(rgb, float(rng.uniform(0.6, 1.4)))
    out = TF.adjust_contrast(out, float(rng.uniform(0.6, 1.4)))
    out = TF.adjust_saturation(out, float(rng.uniform(0.6, 1.4)))
    return TF.adjust_hue(out, float(rng.uniform(-0.1, 0.1)))


def _posterize(rgb: torch.Tensor, rng: np.random.Generator) -> torch.Tensor:
    return TF.posterize(rgb, int(rng.integers(3, 7)))


def _equalize(rgb: torch.Tensor, rng: np.random.Generator) -> torch.Tensor:
    return TF.equalize(rgb)


_INTENSITY_TRANSFORMS = (
    _color_jitter,
    _posterize,
    _equalize,
    lambda rgb, rng: rgb,
)


def augment_pair(
    rgb: torch.Tensor,
    mask: torch.Tensor,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Augment a uint8 RGB (3, H, W) / binary mask (1, H, W) pair.

    Deterministic for a given rng state. The mask value set {0, 1} is
    preserved (nearest-neighbor geometry only, no intensity ops on the mask).
    """
    if rgb.shape[-2:] != mask.shape[-2:]:
        raise ValueError("rgb and mask dimensions differ")
    if config.intensity_augment:
        pick = int(rng.integers(0, len(_INTENSITY_TRANSFORMS)))
        rgb = _INTENSITY_TRANSFORMS[pick](rgb, rng)
    if config.rotation_augment:
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        rgb = rotate_rgb(rgb, angle)
        mask = rotate_mask(mask, angle)
    return rgb, mask
