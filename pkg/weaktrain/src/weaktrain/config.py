"""Training configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

ENCODER_STRIDE = 32


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 8
    learning_rate: float = 2e-3
    weight_decay: float = 1e-4
    rotation_augment: bool = True
    intensity_augment: bool = True
    input_resolution: int = 128
    pretrained_encoder: bool = False
    holdout_split: bool = True  # disable to overfit deliberately (sanity runs)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be >= 0")
        if self.input_resolution < ENCODER_STRIDE or self.input_resolution % ENCODER_STRIDE:
            raise ValueError(
                f"input_resolution must be a positive multiple of {ENCODER_STRIDE}"
            )

    def to_dict(self) -> dict:
        return asdict(self)
