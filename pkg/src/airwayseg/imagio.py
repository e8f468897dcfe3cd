"""Raster types and bit-exact file I/O.

Formats:
    depth       16-bit single-channel PNG (integer counts, scaled on load,
                value 0 = invalid) or grayscale PFM (little-endian written,
                non-finite = invalid)
    mask        8-bit single-channel PNG with values {0, 255}
    instances   16-bit single-channel PNG, pixel value = label id (0 = bg)
    manifest    JSON lines, one object per sample, keys id/rgb/depth/gt

Loading is strict: out-of-contract pixel values raise instead of being
clamped. All loaded images are immutable value objects.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    """File exists but its contents violate the format contract."""


class ManifestError(ValueError):
    """Manifest file is malformed or inconsistent."""


def _as_2d(data: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class DepthImage:
    """Dense depth raster; larger values are farther from the camera.

    ``valid`` marks pixels carrying a measurement. Values at invalid pixels
    are canonicalized to 0 so that equality and round-trips are well defined.
    """

    data: np.ndarray
    valid: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        data = _as_2d(self.data, "depth").astype(np.float64, copy=True)
        if self.valid is None:
            valid = np.ones(data.shape, dtype=bool)
        else:
            valid = _as_2d(self.valid, "valid mask").astype(bool, copy=True)
            if valid.shape != data.shape:
                raise ValueError("valid mask shape differs from depth shape")
        vals = data[valid]
        if vals.size and (not np.all(np.isfinite(vals)) or np.any(vals < 0)):
            raise ValueError("valid depth values must be finite and >= 0")
        data[~valid] = 0.0
        data.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """8-bit 3-channel raster, shape (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"rgb image must have shape (H, W, 3), got {arr.shape}")
        arr = arr.astype(np.uint8, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """Boolean raster; True marks the segmented (airway) class."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_2d(self.data, "mask").astype(bool, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class InstanceMap:
    """Per-pixel instance labels: 0 = background, 1..K = instances.

    Labels must form the contiguous set {0, .., K} (no gaps) and every
    nonzero label must own at least one pixel.
    """

    labels: np.ndarray

    def __post_init__(self):
        arr = _as_2d(self.labels, "labels")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("instance labels must be integers")
        arr = arr.astype(np.int32, copy=True)
        if arr.size and arr.min() < 0:
            raise ValueError("instance labels must be non-negative")
        counts = np.bincount(arr.ravel())
        if len(counts) > 1 and np.any(counts[1:] == 0):
            raise ValueError("instance labels must be contiguous with no empty labels")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_instances(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    rgb_path: Path | None = None
    depth_path: Path | None = None
    gt_path: Path | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


# ---------------------------------------------------------------- PNG helpers


def _open_png(path: str | Path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ImageFormatError(f"unreadable image {path}: {exc}") from exc
    return img


def _png_gray16(path: str | Path) -> np.ndarray:
    img = _open_png(path)
    if img.mode not in ("I;16", "I"):
        raise ImageFormatError(
            f"{path}: expected 16-bit single-channel PNG, got mode {img.mode!r}"
        )
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise ImageFormatError(f"{path}: zero-area or non-2D image")
    if arr.min() < 0 or arr.max() > 65535:
        raise ImageFormatError(f"{path}: pixel values outside the 16-bit range")
    return arr.astype(np.uint16)


def _save_png_gray16(arr: np.ndarray, path: str | Path) -> None:
    Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")


# ----------------------------------------------------------------------- PFM


def _read_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().rstrip()
        if header == b"Pf":
            channels = 1
        elif header == b"PF":
            raise ImageFormatError(f"{path}: color PFM not supported for depth")
        else:
            raise ImageFormatError(f"{path}: not a PFM file")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise ImageFormatError(f"{path}: malformed PFM dimension line")
        width, height = int(dims[0]), int(dims[1])
        if width < 1 or height < 1:
            raise ImageFormatError(f"{path}: zero-area PFM")
        scale = float(fh.readline().strip())
        endian = "<" if scale < 0 else ">"
        count = width * height * channels
        raw = fh.read(count * 4)
        if len(raw) != count * 4:
            raise ImageFormatError(f"{path}: truncated PFM payload")
        flat = np.frombuffer(raw, dtype=endian + "f4")
    # PFM rows are stored bottom-to-top.
    return flat.reshape(height, width)[::-1].astype(np.float64)


def _write_pfm(data: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(data, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{arr.shape[1]} {arr.shape[0]}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(arr[::-1].astype("<f4").tobytes())


# ----------------------------------------------------------------- operations


def load_depth(path: str | Path, scale: float = 1.0) -> DepthImage:
    """Load a depth image from 16-bit PNG or PFM.

    PNG integer counts are multiplied by ``scale``; PNG value 0 marks an
    invalid pixel. PFM values are taken verbatim (``scale`` does not apply)
    with non-finite values marking invalid pixels. Negative finite PFM values
    are a contract violation and raise.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        raw = _read_pfm(path)
        valid = np.isfinite(raw)
        if np.any(raw[valid] < 0):
            raise ImageFormatError(f"{path}: negative depth values")
        data = np.where(valid, raw, 0.0)
        return DepthImage(data=data, valid=valid)
    counts = _png_gray16(path)
    valid = counts != 0
    return DepthImage(data=counts.astype(np.float64) * float(scale), valid=valid)


def save_depth(depth: DepthImage, path: str | Path) -> None:
    """Write a depth image as grayscale PFM; invalid pixels become NaN."""
    data = depth.data.copy()
    data[~depth.valid] = np.nan
    _write_pfm(data, path)


def load_mask(path: str | Path) -> BinaryMask:
    img = _open_png(path)
    if img.mode != "L":
        raise ImageFormatError(f"{path}: expected 8-bit grayscale mask, got {img.mode!r}")
    arr = np.asarray(img)
    if arr.size == 0:
        raise ImageFormatError(f"{path}: zero-area mask")
    bad = ~np.isin(arr, (0, 255))
    if bad.any():
        raise ImageFormatError(
            f"{path}: mask contains values other than {{0, 255}} "
            f"(first offender {int(arr[bad][0])})"
        )
    return BinaryMask(arr == 255)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    Image.fromarray(np.where(mask.data, 255, 0).astype(np.uint8)).save(path, format="PNG")


def load_instance_map(path: str | Path) -> InstanceMap:
    arr = _png_gray16(path)
    return InstanceMap(arr.astype(np.int32))


def save_instance_map(imap: InstanceMap, path: str | Path) -> None:
    """Write an instance map as a 16-bit label PNG; K must fit in 16 bits."""
    if imap.n_instances > 65535:
        raise ValueError(f"cannot encode {imap.n_instances} labels in 16-bit PNG")
    _save_png_gray16(imap.labels.astype(np.uint16), path)


def load_rgb(path: str | Path) -> RgbImage:
    img = _open_png(path)
    if img.mode != "RGB":
        raise ImageFormatError(f"{path}: expected 8-bit RGB PNG, got {img.mode!r}")
    return RgbImage(np.asarray(img))


def save_rgb(rgb: RgbImage, path: str | Path) -> None:
    Image.fromarray(np.asarray(rgb.data)).save(path, format="PNG")


_MANIFEST_KEYS = {"id", "rgb", "depth", "gt"}


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a JSON-lines manifest, resolving relative paths against its directory."""
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: entry must be a JSON object")
            unknown = set(obj) - _MANIFEST_KEYS
            if unknown:
                raise ManifestError(
                    f"{path}:{lineno}: unknown manifest keys {sorted(unknown)}"
                )
            if "id" not in obj or not isinstance(obj["id"], str) or not obj["id"]:
                raise ManifestError(f"{path}:{lineno}: missing or empty 'id'")
            sid = obj["id"]
            if sid in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate sample id {sid!r}")
            seen.add(sid)

            def resolve(key: str) -> Path | None:
                val = obj.get(key)
                if val is None:
                    return None
                if not isinstance(val, str) or not val:
                    raise ManifestError(f"{path}:{lineno}: {key!r} must be a non-empty string")
                p = Path(val)
                return p if p.is_absolute() else (base / p)

            entry = ManifestEntry(
                sample_id=sid,
                rgb_path=resolve("rgb"),
                depth_path=resolve("depth"),
                gt_path=resolve("gt"),
            )
            if entry.rgb_path is None and entry.depth_path is None and entry.gt_path is None:
                raise ManifestError(f"{path}:{lineno}: entry {sid!r} has no paths")
            entries.append(entry)
    return DatasetManifest(tuple(entries))


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write entries as JSON lines; paths inside the manifest dir are relativized."""
    path = Path(path)
    base = path.parent
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest:
            obj: dict[str, str] = {"id": e.sample_id}
            for key, p in (("rgb", e.rgb_path), ("depth", e.depth_path), ("gt", e.gt_path)):
                if p is not None:
                    p = Path(p)
                    try:
                        obj[key] = os.path.relpath(p, base)
                    except ValueError:
                        obj[key] = str(p)
            fh.write(json.dumps(obj) + "\n")
