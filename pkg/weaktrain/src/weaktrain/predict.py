"""Inference: checkpoint + manifest -> mask PNGs consumable by the eval CLI."""

from __future__ import annotations

import json
from pathlib import Path

import torch
import torchvision.transforms.functional as TF
from torchvision.transforms import InterpolationMode

from . import data, model


def predict(
    checkpoint_path: str | Path,
    manifest_path: str | Path,
    out_dir: str | Path,
    threshold: float = 0.5,
) -> list[Path]:
    """Write one ``<sample_id>.png`` binary mask per manifest rgb entry.

    Inputs are resized to the model resolution for the forward pass and the
    thresholded mask is resized back to the source resolution with nearest
    neighbor, so outputs pair pixel-for-pixel with the original frames.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    net, config, _ = model.load_checkpoint(checkpoint_path)
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    written: list[Path] = []
    with open(manifest_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            sid, rgb = obj.get("id"), obj.get("rgb")
            if sid is None or rgb is None:
                continue
            rgb_path = Path(rgb) if Path(rgb).is_absolute() else base / rgb
            rgb_t = data.load_rgb_tensor(rgb_path)
            src_h, src_w = rgb_t.shape[-2:]
            size = config.input_resolution
            if (src_h, src_w) != (size, size):
                x = TF.resize(rgb_t, [size, size],
                              interpolation=InterpolationMode.BILINEAR, antialias=True)
            else:
                x = rgb_t
            with torch.no_grad():
                logits = model.forward_logits(net, data.normalize_rgb(x).unsqueeze(0))
            mask = (torch.sigmoid(logits)[0] >= threshold).to(torch.uint8)
            if (src_h, src_w) != (size, size):
                mask = TF.resize(mask, [src_h, src_w],
                                 interpolation=InterpolationMode.NEAREST)
            out_path = out_dir / f"{sid}.png"
            data.save_mask_png(mask, out_path)
            written.append(out_path)
    if not written:
        raise ValueError(f"{manifest_path}: no rgb entries to predict on")
    return written
