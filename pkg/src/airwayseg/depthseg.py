"""Depth-to-instances segmentation pipeline.

Stages, in run order: two-class k-means on the depth distribution yields the
global airway mask and threshold; the depth image is smoothed by repeated box
filtering; local depth maxima inside the mask become markers after greedy
minimum-distance suppression; a compactness-augmented marker-based priority
flood over the inverted raw depth grows one region per marker; the flood
result is composed with the airway mask and implausibly large instances are
dropped by a relative area threshold.

Every stage is a pure, deterministic function; all tie-breaking rules are
total (documented per stage), so repeated runs produce byte-identical
instance maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .imagio import BinaryMask, DepthImage, InstanceMap

MIN_PIPELINE_DIM = 8


class DegenerateDepthError(ValueError):
    """Depth image cannot be split into two clusters (constant or all-invalid)."""


@dataclass(frozen=True)
class PipelineConfig:
    """Tunables for the segmentation pipeline.

    ``compactness`` acts on depth normalized to [0, 1] with pixel distances
    normalized by max(width, height); 0 disables the compactness term.
    ``area_threshold`` is the fraction of total image area above which an
    instance is discarded; 1.0 disables the filter.
    """

    smoothing_passes: int = 3
    smoothing_kernel: int = 3
    peak_spacing_fraction: float = 0.05
    compactness: float = 1.0
    area_threshold: float = 0.5
    connectivity: int = 4

    def __post_init__(self):
        if self.smoothing_passes < 0:
            raise ValueError("smoothing_passes must be >= 0")
        if self.smoothing_kernel < 1 or self.smoothing_kernel % 2 == 0:
            raise ValueError("smoothing_kernel must be odd and >= 1")
        if not 0.0 < self.peak_spacing_fraction < 1.0:
            raise ValueError("peak_spacing_fraction must be in (0, 1)")
        if self.compactness < 0:
            raise ValueError("compactness must be >= 0")
        if not 0.0 < self.area_threshold <= 1.0:
            raise ValueError("area_threshold must be in (0, 1]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class Peak:
    """A marker pixel: local maximum of the smoothed depth inside the mask."""

    row: int
    col: int
    value: float


@dataclass(frozen=True)
class PipelineResult:
    instances: InstanceMap
    mask: BinaryMask
    peaks: tuple[Peak, ...]
    threshold: float | None
    flagged: bool = False
    flag_reason: str | None = None


def kmeans2_depth(depth: DepthImage) -> tuple[BinaryMask, float]:
    """Two-class 1-D k-means over valid depth values; far cluster = airway.

    Lloyd iterations with centroids initialized at (min, max) of the valid
    values, converged when both centroids move less than 1e-9 x value range
    (or after 100 iterations). Returns the mask (valid pixels >= threshold)
    and the threshold, the midpoint of the final centroids.
    """
    vals = depth.data[depth.valid]
    if vals.size == 0:
        raise DegenerateDepthError("all pixels invalid")
    vmin = float(vals.min())
    vmax = float(vals.max())
    if vmin == vmax:
        raise DegenerateDepthError("constant depth image: only one cluster")
    srt = np.sort(vals)
    csum = np.cumsum(srt)
    n = srt.size
    value_range = vmax - vmin
    c_lo, c_hi = vmin, vmax
    for _ in range(100):
        mid = 0.5 * (c_lo + c_hi)
        # values < mid go low, >= mid go high; min < mid <= max always holds
        split = int(np.searchsorted(srt, mid, side="left"))
        new_lo = csum[split - 1] / split
        new_hi = (csum[-1] - csum[split - 1]) / (n - split)
        done = (
            abs(new_lo - c_lo) < 1e-9 * value_range
            and abs(new_hi - c_hi) < 1e-9 * value_range
        )
        c_lo, c_hi = float(new_lo), float(new_hi)
        if done:
            break
    threshold = 0.5 * (c_lo + c_hi)
    mask = depth.valid & (depth.data >= threshold)
    return BinaryMask(mask), threshold


def smooth_depth(depth: DepthImage, config: PipelineConfig) -> DepthImage:
    """Apply ``smoothing_passes`` box-mean filters; validity is unchanged."""
    k = backend.get_backend()
    out = k.box_smooth(
        depth.data, depth.valid, config.smoothing_kernel, config.smoothing_passes
    )
    return DepthImage(data=out, valid=depth.valid)


def min_peak_distance(config: PipelineConfig, width: int, height: int) -> int:
    # tolerate float noise in fraction * dim landing just above an integer
    raw = config.peak_spacing_fraction * min(width, height)
    return max(1, math.ceil(raw - 1e-9))


def detect_peaks(
    smoothed: DepthImage, mask: BinaryMask, config: PipelineConfig
) -> list[Peak]:
    """Local maxima of the smoothed depth inside the mask, greedily thinned.

    Candidates are mask pixels >= all in-bounds 8-neighbors (plateau ties
    kept). They are ranked by value descending, row-major for equal values,
    and accepted iff at Euclidean distance >= ceil(peak_spacing_fraction x
    min(width, height)) from every previously accepted peak. Returned in
    acceptance order.
    """
    if mask.data.shape != smoothed.data.shape:
        raise ValueError("mask dimensions must match the image")
    if not mask.data.any():
        return []
    k = backend.get_backend()
    rows, cols = k.local_max_candidates(smoothed.data, mask.data)
    if len(rows) == 0:
        return []
    values = smoothed.data[rows, cols]
    # np.lexsort: last key is primary -> value desc, then row, then col
    order = np.lexsort((cols, rows, -values))
    dist = min_peak_distance(config, smoothed.width, smoothed.height)
    accepted = k.greedy_nms(rows, cols, order, dist)
    return [
        Peak(row=int(rows[i]), col=int(cols[i]), value=float(values[i]))
        for i in accepted
    ]


def invert_depth(depth: DepthImage) -> DepthImage:
    """Reflect valid depths about their maximum so basins sit at the markers."""
    vals = depth.data[depth.valid]
    if vals.size == 0:
        raise ValueError("cannot invert an all-invalid depth image")
    inv = np.where(depth.valid, float(vals.max()) - depth.data, 0.0)
    return DepthImage(data=inv, valid=depth.valid)


def compact_watershed(
    inverted: DepthImage, markers: list[Peak], config: PipelineConfig
) -> InstanceMap:
    """Grow one region per marker by compactness-augmented priority flood.

    The inverted image is normalized to [0, 1] by its own valid min/max
    (a constant image normalizes to all zeros, making priority purely
    distance). Marker k (list order) seeds label k+1 at priority equal to
    its normalized value; the lowest-priority pixel pops first (FIFO among
    equal priorities), gets its region's label on first pop, and pushes each
    unlabeled valid neighbor at priority

        normalized(neighbor) + compactness * dist(neighbor, region seed)
                               / max(width, height).

    Valid pixels not connected to any marker through valid pixels stay 0
    (possible only when the valid domain is disconnected).
    """
    if not markers:
        raise ValueError("compact watershed requires at least one marker")
    h, w = inverted.data.shape
    seen: set[tuple[int, int]] = set()
    for p in markers:
        if not (0 <= p.row < h and 0 <= p.col < w):
            raise ValueError(f"marker ({p.row}, {p.col}) outside image bounds")
        if not inverted.valid[p.row, p.col]:
            raise ValueError(f"marker ({p.row}, {p.col}) sits on an invalid pixel")
        if (p.row, p.col) in seen:
            raise ValueError(f"duplicate marker at ({p.row}, {p.col})")
        seen.add((p.row, p.col))
    vals = inverted.data[inverted.valid]
    vmin = float(vals.min())
    vmax = float(vals.max())
    if vmax > vmin:
        norm = np.where(inverted.valid, (inverted.data - vmin) / (vmax - vmin), 0.0)
    else:
        norm = np.zeros_like(inverted.data)
    k = backend.get_backend()
    labels = k.compact_flood(
        norm,
        inverted.valid,
        np.asarray([p.row for p in markers], dtype=np.int64),
        np.asarray([p.col for p in markers], dtype=np.int64),
        float(config.compactness),
        config.connectivity,
        float(max(w, h)),
    )
    return InstanceMap(labels)


def _relabel_compact(labels: np.ndarray) -> np.ndarray:
    """Map surviving labels onto {1..K'} preserving relative order."""
    present = np.unique(labels)
    present = present[present > 0]
    lut = np.zeros(int(labels.max()) + 1 if labels.size else 1, dtype=np.int32)
    lut[present] = np.arange(1, len(present) + 1, dtype=np.int32)
    return lut[labels]


def compose(instances: InstanceMap, mask: BinaryMask) -> InstanceMap:
    """Zero instance pixels outside the mask, then re-compact the labels."""
    if instances.labels.shape != mask.data.shape:
        raise ValueError("instance map and mask dimensions differ")
    kept = np.where(mask.data, instances.labels, 0)
    return InstanceMap(_relabel_compact(kept))


def area_filter(instances: InstanceMap, config: PipelineConfig) -> InstanceMap:
    """Drop instances covering more than area_threshold of the image."""
    labels = instances.labels
    limit = config.area_threshold * labels.size
    counts = np.bincount(labels.ravel())
    too_big = np.nonzero(counts > limit)[0]
    too_big = too_big[too_big > 0]
    if len(too_big) == 0:
        return instances
    kept = np.where(np.isin(labels, too_big), 0, labels)
    return InstanceMap(_relabel_compact(kept))


def _empty_result(
    depth: DepthImage,
    reason: str,
    mask: BinaryMask | None = None,
    threshold: float | None = None,
    peaks: tuple[Peak, ...] = (),
) -> PipelineResult:
    shape = depth.data.shape
    return PipelineResult(
        instances=InstanceMap(np.zeros(shape, dtype=np.int32)),
        mask=mask if mask is not None else BinaryMask(np.zeros(shape, dtype=bool)),
        peaks=peaks,
        threshold=threshold,
        flagged=True,
        flag_reason=reason,
    )


def run_pipeline(depth: DepthImage, config: PipelineConfig | None = None) -> PipelineResult:
    """Run the full depth-to-instances pipeline on one frame.

    Degenerate depth (constant or all-invalid) and zero-peak frames yield a
    flagged empty result instead of raising, so batch jobs can continue.
    """
    if config is None:
        config = PipelineConfig()
    if depth.width < MIN_PIPELINE_DIM or depth.height < MIN_PIPELINE_DIM:
        raise ValueError(
            f"pipeline requires at least {MIN_PIPELINE_DIM}x{MIN_PIPELINE_DIM} images"
        )
    try:
        mask, threshold = kmeans2_depth(depth)
    except DegenerateDepthError as exc:
        return _empty_result(depth, f"degenerate depth: {exc}")
    smoothed = smooth_depth(depth, config)
    peaks = detect_peaks(smoothed, mask, config)
    if not peaks:
        return _empty_result(depth, "no peaks detected", mask=mask, threshold=threshold)
    ws = compact_watershed(invert_depth(depth), peaks, config)
    instances = area_filter(compose(ws, mask), config)
    return PipelineResult(
        instances=instances,
        mask=mask,
        peaks=tuple(peaks),
        threshold=threshold,
        flagged=False,
    )
