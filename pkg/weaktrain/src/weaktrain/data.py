"""Dataset plumbing over the segmentation pipeline's file formats.

The trainer consumes the pipeline's external interfaces directly: JSON-lines
manifests (keys id/rgb/depth/gt) and 8-bit {0, 255} mask PNGs. The mask under
``gt`` is the training label; for weak supervision that is the mask the depth
pipeline produced, for supervised baselines it can be an annotation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class SamplePaths:
    sample_id: str
    rgb_path: Path
    label_path: Path


def read_manifest_pairs(path: str | Path) -> list[SamplePaths]:
    """Collect samples with both an rgb and a label (gt) path."""
    path = Path(path)
    base = path.parent
    pairs: list[SamplePaths] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            sid = obj.get("id")
            if not sid or sid in seen:
                raise ValueError(f"{path}:{lineno}: missing or duplicate sample id")
            seen.add(sid)
            rgb, gt = obj.get("rgb"), obj.get("gt")
            if rgb is None or gt is None:
                continue
            resolve = lambda p: Path(p) if Path(p).is_absolute() else base / p
            pairs.append(SamplePaths(sid, resolve(rgb), resolve(gt)))
    return pairs


def load_rgb_tensor(path: Path) -> torch.Tensor:
    """8-bit RGB PNG as a uint8 tensor of shape (3, H, W)."""
    img = Image.open(path)
    if img.mode != "RGB":
        raise ValueError(f"{path}: expected RGB PNG, got mode {img.mode!r}")
    arr = np.asarray(img)
    return torch.from_numpy(arr.copy()).permute(2, 0, 1)


def load_mask_tensor(path: Path) -> torch.Tensor:
    """{0, 255} mask PNG as a {0, 1} uint8 tensor of shape (1, H, W)."""
    img = Image.open(path)
    if img.mode != "L":
        raise ValueError(f"{path}: expected 8-bit grayscale mask, got {img.mode!r}")
    arr = np.asarray(img)
    if not np.isin(arr, (0, 255)).all():
        raise ValueError(f"{path}: mask values must be 0 or 255")
    return torch.from_numpy((arr == 255).astype(np.uint8)).unsqueeze(0)


def save_mask_png(mask01: torch.Tensor, path: Path) -> None:
    """{0, 1} tensor (1, H, W) or (H, W) to a {0, 255} mask PNG."""
    arr = mask01.squeeze().cpu().numpy().astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def is_validation_id(sample_id: str) -> bool:
    """Deterministic 90/10 split on a hash of the sample id."""
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()
    return digest[0] % 10 == 0


def normalize_rgb(rgb_uint8: torch.Tensor) -> torch.Tensor:
    """uint8 (3, H, W) to float32 normalized with ImageNet statistics."""
    x = rgb_uint8.to(torch.float32) / 255.0
    mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(3, 1, 1)
    return (x - mean) / std


def resize_pair(
    rgb: torch.Tensor, mask: torch.Tensor, size: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Resize rgb bilinearly and mask with nearest neighbor to size x size."""
    import torchvision.transforms.functional as TF
    from torchvision.transforms import InterpolationMode

    if rgb.shape[-2:] != (size, size):
        rgb = TF.resize(rgb, [size, size], interpolation=InterpolationMode.BILINEAR,
                        antialias=True)
    if mask.shape[-2:] != (size, size):
        mask = TF.resize(mask, [size, size], interpolation=InterpolationMode.NEAREST)
    return rgb, mask
