"""Batch command-line front end.

Subcommands:
    segment   run the depth pipeline over a manifest, write per-sample outputs
    eval      score prediction masks against manifest ground truth
    bench     time the pipeline on synthetic frames (I/O excluded)
    synth     write a synthetic dataset (depth PFM, GT PNGs, RGB, manifest)
    overlay   draw instance contours over an RGB or depth base image

Exit codes: 0 success, 1 hard failure, 2 partial (some samples failed or
were skipped).
"""

from __future__ import annotations

import argparse
import colorsys
import dataclasses
import json
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import backend, imagio, metrics, synthgen
from .depthseg import PipelineConfig, PipelineResult, run_pipeline
from .imagio import BinaryMask, DepthImage, InstanceMap, RgbImage

EXIT_OK = 0
EXIT_HARD = 1
EXIT_PARTIAL = 2


@dataclasses.dataclass(frozen=True)
class RunSummary:
    frames_processed: int
    flagged_empty: int
    wall_time: float
    latency_median_ms: float
    latency_p95_ms: float

    @property
    def throughput(self) -> float:
        return self.frames_processed / self.wall_time if self.wall_time > 0 else 0.0

    @property
    def median_hz(self) -> float:
        return 1000.0 / self.latency_median_ms if self.latency_median_ms > 0 else 0.0

    def format(self) -> str:
        return (
            f"frames: {self.frames_processed}  flagged empty: {self.flagged_empty}\n"
            f"wall time: {self.wall_time:.3f} s  throughput: {self.throughput:.1f} fps\n"
            f"latency: median {self.latency_median_ms:.3f} ms  "
            f"p95 {self.latency_p95_ms:.3f} ms  ({self.median_hz:.1f} Hz median)"
        )


def _percentile_p95(latencies: list[float]) -> float:
    # nearest-rank percentile: deterministic and defined for tiny n
    srt = sorted(latencies)
    idx = max(0, -(-len(srt) * 95 // 100) - 1)
    return srt[idx]


def _summarize(latencies_s: list[float], flagged: int, wall_time: float) -> RunSummary:
    ms = [t * 1000.0 for t in latencies_s]
    return RunSummary(
        frames_processed=len(ms),
        flagged_empty=flagged,
        wall_time=wall_time,
        latency_median_ms=statistics.median(ms) if ms else 0.0,
        latency_p95_ms=_percentile_p95(ms) if ms else 0.0,
    )


def load_config(path: str | None) -> PipelineConfig:
    """Build a PipelineConfig from a JSON file; unknown keys are errors."""
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    return PipelineConfig(**obj)


# ------------------------------------------------------------------- segment


class _Done:
    def __init__(self, value):
        self._value = value

    def result(self):
        return self._value


class _Failed:
    def __init__(self, exc):
        self._exc = exc

    def result(self):
        raise self._exc


def _segment_one(
    entry: imagio.ManifestEntry, config: PipelineConfig, scale: float, out_dir: Path
) -> tuple[PipelineResult, float]:
    depth = imagio.load_depth(entry.depth_path, scale=scale)
    t0 = time.perf_counter()
    result = run_pipeline(depth, config)
    dt = time.perf_counter() - t0
    imagio.save_instance_map(result.instances, out_dir / f"{entry.sample_id}.instances.png")
    imagio.save_mask(result.mask, out_dir / f"{entry.sample_id}.mask.png")
    payload = {
        "sample_id": entry.sample_id,
        "flagged": result.flagged,
        "flag_reason": result.flag_reason,
        "threshold": result.threshold,
        "peaks": [{"row": p.row, "col": p.col, "value": p.value} for p in result.peaks],
    }
    (out_dir / f"{entry.sample_id}.peaks.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    return result, dt


def cmd_segment(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    manifest = imagio.load_manifest(args.manifest)
    entries = [e for e in manifest if e.depth_path is not None]
    if not entries:
        print("error: manifest has no entries with depth paths", file=sys.stderr)
        return EXIT_HARD
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures: list[str] = []
    flagged = 0
    latencies: list[float] = []
    t_start = time.perf_counter()

    def work(entry: imagio.ManifestEntry):
        return _segment_one(entry, config, args.scale, out_dir)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            futures = {e.sample_id: pool.submit(work, e) for e in entries}
            outcomes = [(sid, f) for sid, f in futures.items()]
    else:
        outcomes = []
        for e in entries:
            try:
                res = work(e)
                outcomes.append((e.sample_id, _Done(res)))
            except Exception as exc:  # per-sample failure: log and continue
                outcomes.append((e.sample_id, _Failed(exc)))
    for sid, fut in outcomes:
        try:
            result, dt = fut.result()
        except Exception as exc:
            failures.append(sid)
            print(f"sample {sid}: failed: {exc}", file=sys.stderr)
            continue
        latencies.append(dt)
        if result.flagged:
            flagged += 1
            print(f"sample {sid}: flagged empty ({result.flag_reason})", file=sys.stderr)
    wall = time.perf_counter() - t_start
    summary = _summarize(latencies, flagged, wall)
    print(summary.format())
    if failures:
        print(f"{len(failures)} sample(s) failed: {', '.join(failures)}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------------- eval


def _resample_nearest(mask: BinaryMask, size: int) -> BinaryMask:
    src_h, src_w = mask.data.shape
    if (src_h, src_w) == (size, size):
        return mask
    rows = np.minimum((np.arange(size) + 0.5) * src_h / size, src_h - 1).astype(np.int64)
    cols = np.minimum((np.arange(size) + 0.5) * src_w / size, src_w - 1).astype(np.int64)
    return BinaryMask(mask.data[np.ix_(rows, cols)])


def _find_prediction(pred_dir: Path, sample_id: str) -> Path | None:
    for name in (f"{sample_id}.png", f"{sample_id}.mask.png"):
        p = pred_dir / name
        if p.exists():
            return p
    return None


def cmd_eval(args: argparse.Namespace) -> int:
    manifest = imagio.load_manifest(args.manifest)
    pred_dir = Path(args.pred)
    gt_entries = [e for e in manifest if e.gt_path is not None]
    if not gt_entries:
        print("error: manifest has no ground-truth entries", file=sys.stderr)
        return EXIT_HARD
    results: list[metrics.EvalResult] = []
    missing: list[str] = []
    for entry in gt_entries:
        pred_path = _find_prediction(pred_dir, entry.sample_id)
        if pred_path is None:
            missing.append(entry.sample_id)
            continue
        pred = imagio.load_mask(pred_path)
        gt = imagio.load_mask(entry.gt_path)
        if args.eval_resolution:
            pred = _resample_nearest(pred, args.eval_resolution)
            gt = _resample_nearest(gt, args.eval_resolution)
        results.append(metrics.evaluate_sample(pred, gt, sample_id=entry.sample_id))
    if missing:
        print(
            f"warning: no prediction for {len(missing)} sample(s): {', '.join(missing)}",
            file=sys.stderr,
        )
    if not results:
        print("error: no predictions matched the manifest", file=sys.stderr)
        return EXIT_HARD
    report = metrics.aggregate(results)
    print(report.format_table())
    csv_path = Path(args.out) if args.out else pred_dir / "report.csv"
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    print(f"report written to {csv_path}")
    return EXIT_PARTIAL if missing else EXIT_OK


# --------------------------------------------------------------------- bench


def _bench_backend(name: str, frames: list[DepthImage], config: PipelineConfig) -> RunSummary:
    backend.set_backend(name)
    flagged = 0
    latencies: list[float] = []
    t0 = time.perf_counter()
    for depth in frames:
        t1 = time.perf_counter()
        result = run_pipeline(depth, config)
        latencies.append(time.perf_counter() - t1)
        if result.flagged:
            flagged += 1
    wall = time.perf_counter() - t0
    return _summarize(latencies, flagged, wall)


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    rng = np.random.default_rng(args.seed)
    frames = []
    for i in range(args.frames):
        k = int(rng.integers(1, 6))
        spec = synthgen.random_scene(args.resolution, args.resolution, k, seed=args.seed + i)
        depth, _ = synthgen.generate(spec)
        frames.append(depth)
    names = (
        list(backend.available_backends()) if args.backend == "both" else [args.backend]
    )
    prev = backend.get_backend()
    try:
        for name in names:
            summary = _bench_backend(name, frames, config)
            label = backend.get_backend().NAME
            print(f"backend: {label}  resolution: {args.resolution}x{args.resolution}")
            print(summary.format())
    finally:
        backend.set_backend(prev.NAME)
    return EXIT_OK


# --------------------------------------------------------------------- synth


def _render_rgb(depth: DepthImage) -> RgbImage:
    """Grayscale rendering of depth (near = bright) replicated to 3 channels."""
    vals = depth.data[depth.valid]
    lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    gray = np.zeros(depth.data.shape, dtype=np.float64)
    gray[depth.valid] = 1.0 - (depth.data[depth.valid] - lo) / span
    channel = np.round(gray * 255.0).astype(np.uint8)
    return RgbImage(np.stack([channel, channel, channel], axis=-1))


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(args.scenes):
        sid = f"scene{i:04d}"
        spec = synthgen.random_scene(
            args.resolution, args.resolution, args.orifices, seed=args.seed + i
        )
        depth, gt_instances = synthgen.generate(spec)
        depth_path = out_dir / f"{sid}.depth.pfm"
        gt_inst_path = out_dir / f"{sid}.gt_instances.png"
        gt_mask_path = out_dir / f"{sid}.gt.png"
        rgb_path = out_dir / f"{sid}.rgb.png"
        imagio.save_depth(depth, depth_path)
        imagio.save_instance_map(gt_instances, gt_inst_path)
        imagio.save_mask(BinaryMask(gt_instances.labels > 0), gt_mask_path)
        imagio.save_rgb(_render_rgb(depth), rgb_path)
        synthgen.save_scene_spec(spec, out_dir / f"{sid}.scene.json")
        entries.append(
            imagio.ManifestEntry(
                sample_id=sid, rgb_path=rgb_path, depth_path=depth_path, gt_path=gt_mask_path
            )
        )
    imagio.write_manifest(imagio.DatasetManifest(tuple(entries)), out_dir / "manifest.jsonl")
    print(f"wrote {args.scenes} scene(s) to {out_dir}")
    return EXIT_OK


# ------------------------------------------------------------------- overlay


def _distinct_color(i: int) -> tuple[int, int, int]:
    hue = (i * 0.6180339887498949) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 1.0)
    return int(r * 255), int(g * 255), int(b * 255)


def instance_contours(instances: InstanceMap) -> np.ndarray:
    """Boolean raster of instance pixels with a 4-neighbor of another label."""
    labels = instances.labels
    contour = np.zeros(labels.shape, dtype=bool)
    inside = labels > 0
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        neighbor = np.roll(labels, shift, axis=axis)
        # roll wraps around; treat wrapped rows/cols as out-of-bounds (differs)
        differs = neighbor != labels
        if axis == 0:
            edge = 0 if shift == 1 else -1
            differs[edge, :] = True
        else:
            edge = 0 if shift == 1 else -1
            differs[:, edge] = True
        contour |= inside & differs
    return contour


def render_overlay(base: RgbImage, instances: InstanceMap) -> RgbImage:
    if (base.height, base.width) != (instances.height, instances.width):
        raise ValueError("base image and instance map dimensions differ")
    out = base.data.copy()
    contour = instance_contours(instances)
    for label in range(1, instances.n_instances + 1):
        sel = contour & (instances.labels == label)
        out[sel] = _distinct_color(label - 1)
    return RgbImage(out)


def _load_base_image(path: str, scale: float) -> RgbImage:
    p = Path(path)
    if p.suffix.lower() == ".pfm":
        return _render_rgb(imagio.load_depth(p))
    try:
        return imagio.load_rgb(p)
    except imagio.ImageFormatError:
        return _render_rgb(imagio.load_depth(p, scale=scale))


def cmd_overlay(args: argparse.Namespace) -> int:
    base = _load_base_image(args.base, args.scale)
    instances = imagio.load_instance_map(args.instances)
    out = render_overlay(base, instances)
    imagio.save_rgb(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airwayseg",
        description="Depth-driven airway orifice instance segmentation and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_seg = sub.add_parser("segment", help="run the pipeline over a manifest")
    p_seg.add_argument("--manifest", required=True)
    p_seg.add_argument("--out", required=True)
    p_seg.add_argument("--config", default=None, help="pipeline config JSON")
    p_seg.add_argument("--threads", type=int, default=1)
    p_seg.add_argument("--scale", type=float, default=1.0, help="PNG depth scale factor")
    p_seg.set_defaults(func=cmd_segment)

    p_eval = sub.add_parser("eval", help="evaluate prediction masks")
    p_eval.add_argument("--pred", required=True, help="directory with <id>.png masks")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--eval-resolution", type=int, default=None)
    p_eval.add_argument("--out", default=None, help="CSV report path")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="time the pipeline on synthetic frames")
    p_bench.add_argument("--resolution", type=int, default=128)
    p_bench.add_argument("--frames", type=int, default=100)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--config", default=None)
    p_bench.add_argument(
        "--backend",
        choices=["auto", "compiled", "python", "both"],
        default="auto",
        help="kernel backend to time ('both' compares)",
    )
    p_bench.set_defaults(func=cmd_bench)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--scenes", type=int, default=10)
    p_synth.add_argument("--orifices", type=int, default=3)
    p_synth.add_argument("--resolution", type=int, default=128)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.set_defaults(func=cmd_synth)

    p_ov = sub.add_parser("overlay", help="draw instance contours over a base image")
    p_ov.add_argument("--base", required=True, help="RGB PNG, depth PNG, or PFM")
    p_ov.add_argument("--instances", required=True, help="16-bit instance PNG")
    p_ov.add_argument("--out", required=True)
    p_ov.add_argument("--scale", type=float, default=1.0)
    p_ov.set_defaults(func=cmd_overlay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HARD


if __name__ == "__main__":
    sys.exit(main())
