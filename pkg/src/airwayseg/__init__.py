"""Depth-driven airway orifice instance segmentation and evaluation."""

from .depthseg import (
    DegenerateDepthError,
    Peak,
    PipelineConfig,
    PipelineResult,
    area_filter,
    compact_watershed,
    compose,
    detect_peaks,
    invert_depth,
    kmeans2_depth,
    run_pipeline,
    smooth_depth,
)
from .imagio import BinaryMask, DatasetManifest, DepthImage, InstanceMap, RgbImage
from .metrics import (
    Centroid,
    DatasetReport,
    EvalResult,
    aggregate,
    amcd,
    binary_to_instances,
    centroids,
    dsc,
    evaluate_sample,
)
from .synthgen import Orifice, SceneSpec, generate, random_scene

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "Centroid",
    "DatasetManifest",
    "DatasetReport",
    "DegenerateDepthError",
    "DepthImage",
    "EvalResult",
    "InstanceMap",
    "Orifice",
    "Peak",
    "PipelineConfig",
    "PipelineResult",
    "RgbImage",
    "SceneSpec",
    "aggregate",
    "amcd",
    "area_filter",
    "binary_to_instances",
    "centroids",
    "compact_watershed",
    "compose",
    "detect_peaks",
    "dsc",
    "evaluate_sample",
    "generate",
    "invert_depth",
    "kmeans2_depth",
    "random_scene",
    "run_pipeline",
    "smooth_depth",
]
