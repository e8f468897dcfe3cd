"""Segmentation evaluation: Dice overlap and average minimum centroid distance.

Dice (DSC) measures mask overlap but is sensitive to the annotated orifice
diameter, which varies strongly between observers. The centroid-distance
metric (AMCD) is diameter-insensitive: for every ground-truth instance
centroid it takes the distance to the nearest predicted instance centroid
and averages over the ground-truth instances. AMCD is undefined when either
side has no instances; such samples are counted separately, never folded
into the mean.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .imagio import BinaryMask, InstanceMap


@dataclass(frozen=True)
class Centroid:
    """Sub-pixel mean coordinate (center of mass) of one instance."""

    row: float
    col: float


@dataclass(frozen=True)
class EvalResult:
    sample_id: str
    dsc: float
    amcd: float | None  # None when n_gt == 0 or n_pred == 0
    n_gt: int
    n_pred: int


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class DatasetReport:
    """Dataset-level mean +/- population std per metric.

    DSC is stored in [0, 1] and scaled x100 for display; AMCD is in pixels.
    ``amcd`` is None when no sample had a defined AMCD.
    """

    dsc: MetricStats
    amcd: MetricStats | None
    n_samples: int
    undefined_amcd_count: int

    def rows(self) -> list[tuple[str, str, str, int, int]]:
        out = [
            (
                "DSC",
                f"{self.dsc.mean * 100:.2f}",
                f"{self.dsc.std * 100:.2f}",
                self.dsc.n,
                0,
            )
        ]
        if self.amcd is not None:
            out.append(
                (
                    "AMCD[px]",
                    f"{self.amcd.mean:.2f}",
                    f"{self.amcd.std:.2f}",
                    self.amcd.n,
                    self.undefined_amcd_count,
                )
            )
        else:
            out.append(("AMCD[px]", "--", "--", 0, self.undefined_amcd_count))
        return out

    def format_table(self) -> str:
        lines = [f"{'metric':<10}{'mean±std':<18}{'n':>6}{'undefined':>11}"]
        for metric, mean, std, n, undef in self.rows():
            cell = f"{mean}±{std}" if mean != "--" else "--"
            lines.append(f"{metric:<10}{cell:<18}{n:>6}{undef:>11}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric", "mean", "std", "n", "undefined_count"])
        for row in self.rows():
            writer.writerow(row)
        return buf.getvalue()


def dsc(a: BinaryMask, b: BinaryMask, empty_value: float = 1.0) -> float:
    """Dice coefficient 2|A∩B| / (|A|+|B|); two empty masks score ``empty_value``."""
    if a.data.shape != b.data.shape:
        raise ValueError("mask dimensions differ")
    total = int(a.data.sum()) + int(b.data.sum())
    if total == 0:
        return empty_value
    inter = int((a.data & b.data).sum())
    return 2.0 * inter / total


def centroids(instances: InstanceMap) -> list[Centroid]:
    """Arithmetic mean pixel coordinate of each instance, ordered by label."""
    labels = instances.labels
    k = instances.n_instances
    if k == 0:
        return []
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k + 1).astype(np.float64)
    rows_idx, cols_idx = np.indices(labels.shape)
    sum_r = np.bincount(flat, weights=rows_idx.ravel(), minlength=k + 1)
    sum_c = np.bincount(flat, weights=cols_idx.ravel(), minlength=k + 1)
    return [
        Centroid(row=sum_r[i] / counts[i], col=sum_c[i] / counts[i])
        for i in range(1, k + 1)
    ]


def binary_to_instances(mask: BinaryMask) -> InstanceMap:
    """8-connected components of the mask, labeled in first-encounter raster order."""
    k = backend.get_backend()
    labels, _ = k.label_components8(mask.data)
    return InstanceMap(labels)


def amcd(gt: list[Centroid], pred: list[Centroid]) -> float | None:
    """Mean over gt centroids of the distance to the nearest pred centroid.

    Returns None (undefined) when either list is empty. Not symmetric in its
    arguments: extra predictions are never penalized.
    """
    if not gt or not pred:
        return None
    total = 0.0
    for c in gt:
        best = math.inf
        for p in pred:
            d = math.hypot(c.row - p.row, c.col - p.col)
            if d < best:
                best = d
        total += best
    return total / len(gt)


def evaluate_sample(
    pred_mask: BinaryMask, gt_mask: BinaryMask, sample_id: str = ""
) -> EvalResult:
    """DSC on the masks; AMCD on centroids of their connected components."""
    if pred_mask.data.shape != gt_mask.data.shape:
        raise ValueError("prediction and ground truth dimensions differ")
    gt_inst = binary_to_instances(gt_mask)
    pred_inst = binary_to_instances(pred_mask)
    gt_c = centroids(gt_inst)
    pred_c = centroids(pred_inst)
    return EvalResult(
        sample_id=sample_id,
        dsc=dsc(pred_mask, gt_mask),
        amcd=amcd(gt_c, pred_c),
        n_gt=len(gt_c),
        n_pred=len(pred_c),
    )


def _mean_std(values: list[float]) -> MetricStats:
    arr = np.asarray(values, dtype=np.float64)
    # population std, matching the +/- convention of the report format
    return MetricStats(mean=float(arr.mean()), std=float(arr.std()), n=len(values))


def aggregate(results: list[EvalResult]) -> DatasetReport:
    """Fold per-sample results into mean +/- population std per metric."""
    if not results:
        raise ValueError("cannot aggregate zero results")
    dsc_stats = _mean_std([r.dsc for r in results])
    defined = [r.amcd for r in results if r.amcd is not None]
    undefined = len(results) - len(defined)
    amcd_stats = _mean_std(defined) if defined else None
    return DatasetReport(
        dsc=dsc_stats,
        amcd=amcd_stats,
        n_samples=len(results),
        undefined_amcd_count=undefined,
    )
