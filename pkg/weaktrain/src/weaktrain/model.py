"""Segmentation network: reduced atrous-pyramid head over a mobile encoder."""

from __future__ import annotations

import warnings

import torch
from torchvision.models.segmentation import lraspp_mobilenet_v3_large

from .config import TrainConfig


def build_model(config: TrainConfig) -> torch.nn.Module:
    """Single-logit segmentation model; output spatial size equals the input.

    With ``pretrained_encoder`` the backbone loads ImageNet weights; if those
    cannot be fetched (offline), falls back to random initialization with a
    warning instead of failing the run.
    """
    torch.manual_seed(config.seed)
    weights_backbone = None
    if config.pretrained_encoder:
        from torchvision.models import MobileNet_V3_Large_Weights

        weights_backbone = MobileNet_V3_Large_Weights.IMAGENET1K_V1
    try:
        model = lraspp_mobilenet_v3_large(
            weights=None, weights_backbone=weights_backbone, num_classes=1
        )
    except Exception as exc:
        if weights_backbone is None:
            raise
        warnings.warn(
            f"pretrained encoder weights unavailable ({exc}); "
            "falling back to random initialization",
            stacklevel=2,
        )
        torch.manual_seed(config.seed)
        model = lraspp_mobilenet_v3_large(weights=None, weights_backbone=None, num_classes=1)
    return model


def forward_logits(model: torch.nn.Module, batch: torch.Tensor) -> torch.Tensor:
    """(N, 3, H, W) float batch to (N, 1, H, W) logits."""
    return model(batch)["out"]


def save_checkpoint(model: torch.nn.Module, config: TrainConfig, path, extra=None) -> None:
    payload = {
        "model_state": model.state_dict(),
        "config": config.to_dict(),
    }
    if extra:
        payload.update(extra)
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[torch.nn.Module, TrainConfig, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = TrainConfig(**payload["config"])
    # inference-time rebuild never needs the pretrained download
    local = TrainConfig(**{**payload["config"], "pretrained_encoder": False})
    model = build_model(local)
    model.load_state_dict(payload["model_state"])
    model.eval()
    extra = {k: v for k, v in payload.items() if k not in ("model_state", "config")}
    return model, config, extra
