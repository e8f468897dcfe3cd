"""Weak-supervision trainer for binary RGB-to-orifice-mask segmentation."""

from .augment import augment_pair, rotate_mask, rotate_rgb
from .config import TrainConfig
from .model import build_model, forward_logits, load_checkpoint, save_checkpoint
from .predict import predict
from .train import train

__version__ = "0.1.0"

__all__ = [
    "TrainConfig",
    "augment_pair",
    "build_model",
    "forward_logits",
    "load_checkpoint",
    "predict",
    "rotate_mask",
    "rotate_rgb",
    "save_checkpoint",
    "train",
]
