"""Training loop: decoupled-weight-decay Adam on binary cross-entropy."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from . import augment, data, model
from .config import TrainConfig


class PairDataset(Dataset):
    """RGB/label pairs at model resolution, augmented when training."""

    def __init__(self, pairs: list[data.SamplePaths], config: TrainConfig, train: bool):
        self.pairs = pairs
        self.config = config
        self.train = train

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, idx: int):
        p = self.pairs[idx]
        rgb = data.load_rgb_tensor(p.rgb_path)
        mask = data.load_mask_tensor(p.label_path)
        rgb, mask = data.resize_pair(rgb, mask, self.config.input_resolution)
        if self.train and (self.config.rotation_augment or self.config.intensity_augment):
            # per-sample stream: reproducible regardless of batch composition
            rng = np.random.default_rng([self.config.seed, idx])
            rgb, mask = augment.augment_pair(rgb, mask, self.config, rng)
        x = data.normalize_rgb(rgb)
        y = mask.to(torch.float32)
        return x, y


def batch_dice(logits: torch.Tensor, targets: torch.Tensor, eps: float = 1e-7) -> float:
    """Mean per-sample Dice of thresholded predictions against targets."""
    preds = (torch.sigmoid(logits) >= 0.5).to(torch.float32)
    dims = (1, 2, 3)
    inter = (preds * targets).sum(dims)
    total = preds.sum(dims) + targets.sum(dims)
    dice = torch.where(total > 0, 2.0 * inter / (total + eps), torch.ones_like(total))
    return float(dice.mean())


def _recalibrate_batchnorm(net: torch.nn.Module, loader: DataLoader) -> None:
    """Re-estimate BatchNorm running statistics over the loader.

    The mobile backbone's BatchNorm momentum (0.01) converges far too slowly
    for short from-scratch runs, leaving eval-mode statistics stale. A
    cumulative re-estimation pass makes eval-mode inference match what
    training saw.
    """
    torch.optim.swa_utils.update_bn(loader, net)


def _eval_mode_dice(net: torch.nn.Module, loader: DataLoader) -> float:
    net.eval()
    total = 0.0
    n = 0
    with torch.no_grad():
        for x, y in loader:
            logits = model.forward_logits(net, x)
            total += batch_dice(logits, y) * x.shape[0]
            n += x.shape[0]
    return total / n if n else 0.0


def train(manifest_path: str | Path, config: TrainConfig, out_dir: str | Path) -> Path:
    """Train on the manifest's rgb/gt pairs; returns the best checkpoint path.

    Writes ``log.jsonl`` (one {epoch, loss, train_dsc} object per epoch) and
    ``best.pt`` into ``out_dir``. The checkpoint holds the weights of the
    best-Dice epoch with BatchNorm statistics re-estimated on the training
    split, plus the eval-mode train Dice actually achieved by those weights.
    Aborts on an empty dataset or a non-finite loss.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = data.read_manifest_pairs(manifest_path)
    if not pairs:
        raise ValueError(f"{manifest_path}: no samples with both rgb and gt paths")
    if config.holdout_split:
        train_pairs = [p for p in pairs if not data.is_validation_id(p.sample_id)]
        if not train_pairs:  # tiny datasets may hash everything into validation
            train_pairs = pairs
    else:
        train_pairs = pairs

    torch.manual_seed(config.seed)
    net = model.build_model(config)
    net.train()
    optimizer = torch.optim.AdamW(
        net.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    criterion = torch.nn.BCEWithLogitsLoss()
    loader = DataLoader(
        PairDataset(train_pairs, config, train=True),
        batch_size=config.batch_size,
        shuffle=True,
        num_workers=0,
        generator=torch.Generator().manual_seed(config.seed),
    )

    best_dice = -1.0
    best_epoch = -1
    best_state = None
    best_path = out_dir / "best.pt"
    log_path = out_dir / "log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(config.epochs):
            epoch_loss = 0.0
            epoch_dice = 0.0
            n_batches = 0
            for x, y in loader:
                optimizer.zero_grad()
                logits = model.forward_logits(net, x)
                loss = criterion(logits, y)
                if not torch.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch}: {loss.item()!r}; "
                        f"lr={config.learning_rate}, batch_size={config.batch_size}"
                    )
                loss.backward()
                optimizer.step()
                epoch_loss += float(loss.detach())
                epoch_dice += batch_dice(logits.detach(), y)
                n_batches += 1
            epoch_loss /= n_batches
            epoch_dice /= n_batches
            log.write(
                json.dumps({"epoch": epoch, "loss": epoch_loss, "train_dsc": epoch_dice})
                + "\n"
            )
            log.flush()
            if epoch_dice > best_dice:
                best_dice = epoch_dice
                best_epoch = epoch
                best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}

    net.load_state_dict(best_state)
    plain_loader = DataLoader(
        PairDataset(train_pairs, config, train=False),
        batch_size=config.batch_size,
        shuffle=False,
        num_workers=0,
    )
    net.train()
    _recalibrate_batchnorm(net, plain_loader)
    final_dice = _eval_mode_dice(net, plain_loader)
    model.save_checkpoint(
        net, config, best_path, extra={"epoch": best_epoch, "train_dsc": final_dice}
    )
    return best_path
