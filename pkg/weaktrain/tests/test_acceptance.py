"""Secondary acceptance: overfit sanity, augmentation alignment, cross-component eval."""

import csv
import math
import subprocess
import sys
import time

import numpy as np
import pytest
import torch

from weaktrain import TrainConfig, load_checkpoint, predict, rotate_mask, train


def report(name: str, detail: str) -> None:
    print(f"[acceptance] {name}: PASS ({detail})")


@pytest.fixture(scope="session")
def overfit_run(weak_label_dataset, tmp_path_factory):
    """One 200-iteration training run shared by the overfit and integration tests."""
    out = tmp_path_factory.mktemp("overfit")
    config = TrainConfig(
        epochs=200,
        batch_size=8,  # full batch: 200 epochs == 200 optimizer steps
        learning_rate=3e-3,
        weight_decay=1e-4,
        rotation_augment=False,
        intensity_augment=False,
        input_resolution=96,
        pretrained_encoder=False,
        holdout_split=False,
        seed=0,
    )
    t0 = time.perf_counter()
    checkpoint = train(weak_label_dataset, config, out)
    elapsed = time.perf_counter() - t0
    return checkpoint, elapsed


def test_overfit_sanity(overfit_run):
    """8 synthetic rgb/label pairs reach train DSC > 0.9 within 200 iterations
    in under 5 minutes of CPU time."""
    checkpoint, elapsed = overfit_run
    _, _, extra = load_checkpoint(checkpoint)
    dice = extra["train_dsc"]
    assert dice > 0.9, f"train DSC {dice:.4f}"
    assert elapsed < 300.0, f"training took {elapsed:.0f} s"
    report("overfit-sanity", f"train DSC {dice:.4f} after 200 iterations in {elapsed:.0f} s")


def test_augmentation_alignment():
    """Inverse-rotating an augmented disc mask recovers IoU >= 0.95 for 20
    random angles; exact quarter turns recover IoU == 1.0."""
    size = 96
    rr, cc = np.mgrid[0:size, 0:size]
    center = (size - 1) / 2.0
    disc = ((rr - center) ** 2 + (cc - center) ** 2 <= 20.0**2).astype(np.uint8)
    mask = torch.from_numpy(disc).unsqueeze(0)

    def iou(a, b):
        a, b = a.bool(), b.bool()
        return (a & b).sum().item() / (a | b).sum().item()

    rng = np.random.default_rng(123)
    worst = 1.0
    for _ in range(20):
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        recovered = rotate_mask(rotate_mask(mask, angle), -angle)
        worst = min(worst, iou(recovered, mask))
    assert worst >= 0.95, f"worst random-angle IoU {worst:.4f}"

    for k in range(4):
        angle = k * math.pi / 2.0
        recovered = rotate_mask(rotate_mask(mask, angle), -angle)
        assert iou(recovered, mask) == 1.0, f"quarter turn k={k} not lossless"
    report(
        "augmentation-alignment",
        f"worst random-angle IoU {worst:.4f}, quarter turns exact",
    )


def test_cross_component_eval(overfit_run, weak_label_dataset, tmp_path):
    """Masks predicted by the overfit model, scored by the pipeline's eval
    CLI against the training labels, reach DSC > 0.9 (x100 scale: > 90)."""
    checkpoint, _ = overfit_run
    pred_dir = tmp_path / "pred"
    predict(checkpoint, weak_label_dataset, pred_dir)
    csv_path = tmp_path / "report.csv"
    result = subprocess.run(
        [sys.executable, "-m", "airwayseg.cli", "eval",
         "--pred", str(pred_dir),
         "--manifest", str(weak_label_dataset),
         "--out", str(csv_path)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    with open(csv_path, newline="") as fh:
        rows = {row["metric"]: row for row in csv.DictReader(fh)}
    dsc_mean = float(rows["DSC"]["mean"])
    assert int(rows["DSC"]["n"]) == 8
    assert dsc_mean > 90.0, f"cross-component DSC {dsc_mean:.2f}"
    report("cross-component-eval", f"cli eval DSC {dsc_mean:.2f} over 8 samples")


def test_prediction_threshold_extremes(overfit_run, weak_label_dataset, tmp_path):
    """Impossible thresholds produce all-empty / all-full masks."""
    checkpoint, _ = overfit_run
    from PIL import Image

    empty_dir = tmp_path / "empty"
    predict(checkpoint, weak_label_dataset, empty_dir, threshold=1.1)
    full_dir = tmp_path / "full"
    predict(checkpoint, weak_label_dataset, full_dir, threshold=0.0)
    for p in empty_dir.glob("*.png"):
        assert not np.asarray(Image.open(p)).any()
    for p in full_dir.glob("*.png"):
        assert np.asarray(Image.open(p)).all()
