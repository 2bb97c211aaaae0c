"""Canonical in-memory data model and file I/O.

Frames live in linear light as float32 ``(H, W, 3)`` arrays in [0, 1]; the
sRGB transfer function is applied only when crossing the file boundary.
Disparity maps are float32 ``(H, W)`` arrays, strictly positive, with no
assumed scale.  All types are immutable after construction and safe to share
across threads.

On disk a clip is a directory of ``frame_%05d.png`` files (8- or 16-bit)
plus an optional plain-text ``clip_meta.txt`` sidecar (``key=value`` lines:
``frame_rate``, ``disparity_scale``).  Disparity sequences are 16-bit gray
PNGs (values normalized to (0, 1]) or raw-float ``.pfm`` rasters.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

EIGHT_BIT = 8
SIXTEEN_BIT = 16

_FRAME_NAME = "frame_%05d.png"
_META_NAME = "clip_meta.txt"


class DataError(ValueError):
    """Invalid or inconsistent input data (bad file, bad dimensions, bad values)."""


# ---------------------------------------------------------------------------
# sRGB transfer
# ---------------------------------------------------------------------------

def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    """Decode the sRGB transfer function (x in [0,1]) to linear light."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    """Encode linear light (x in [0,1]) with the sRGB transfer function."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.0031308, x * 12.92, 1.055 * np.clip(x, 0.0, None) ** (1.0 / 2.4) - 0.055)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    """One linear-light RGB raster, channel values clamped to [0, 1]."""

    pixels: np.ndarray  # (H, W, 3) float32, read-only

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float32)
        if p.ndim != 3 or p.shape[2] != 3:
            raise DataError(f"frame must be (H, W, 3), got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise DataError("frame dimensions must be >= 1")
        if not np.all(np.isfinite(p)):
            raise DataError("frame contains non-finite values")
        p = np.clip(p, 0.0, 1.0)
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class VideoClip:
    """Ordered frames with uniform dimensions; frame_rate is metadata only."""

    frames: tuple
    frame_rate: float = 25.0

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 1:
            raise DataError("clip must contain at least one frame")
        w, h = frames[0].width, frames[0].height
        for i, f in enumerate(frames):
            if (f.width, f.height) != (w, h):
                raise DataError(f"frame {i} is {f.width}x{f.height}, expected {w}x{h}")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, t: int) -> Frame:
        return self.frames[t]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel disparity (inverse-depth proxy), finite and strictly positive.

    The scale is whatever the source provides; nothing downstream assumes
    values lie in [0, 1].
    """

    values: np.ndarray  # (H, W) float32, read-only

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise DataError(f"disparity must be (H, W), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("disparity contains non-finite values")
        if not np.all(v > 0):
            raise DataError("disparity must be strictly positive")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FocalSpec:
    """Focal-plane disparity, same scale as the paired DisparityMap."""

    d_f: float

    def __post_init__(self):
        if not np.isfinite(self.d_f) or self.d_f <= 0:
            raise DataError(f"focal disparity must be finite and > 0, got {self.d_f}")

    @property
    def z_f(self) -> float:
        """Focal depth, the reciprocal of the focal disparity."""
        return 1.0 / self.d_f


@dataclass(frozen=True)
class BokehParams:
    """User-facing render contract: focal plane, blur strength, layer count."""

    focal: FocalSpec
    K: float = 10.0  # pixels of blur radius per unit disparity difference
    N: int = 8

    def __post_init__(self):
        if not np.isfinite(self.K) or self.K < 0:
            raise DataError(f"blur strength must be >= 0, got {self.K}")
        if self.N < 2:
            raise DataError(f"layer count must be >= 2, got {self.N}")


@dataclass
class ClipMeta:
    """Sidecar metadata; unknown keys are preserved on round trip."""

    frame_rate: float = 25.0
    disparity_scale: float = 1.0
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# PFM codec (grayscale, little- or big-endian)
# ---------------------------------------------------------------------------

def read_pfm(path: Path) -> np.ndarray:
    """Read a grayscale PFM raster as float32 (H, W), top row first."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0].strip() not in (b"Pf", b"PF"):
        raise DataError(f"{path}: not a PFM file")
    if parts[0].strip() == b"PF":
        raise DataError(f"{path}: color PFM not supported, expected grayscale 'Pf'")
    try:
        w, h = (int(v) for v in parts[1].split())
        scale = float(parts[2])
    except ValueError as e:
        raise DataError(f"{path}: malformed PFM header") from e
    raw = parts[3][: w * h * 4]
    if len(raw) < w * h * 4:
        raise DataError(f"{path}: truncated PFM payload")
    endian = "<" if scale < 0 else ">"
    arr = np.frombuffer(raw, dtype=endian + "f4").reshape(h, w)
    # PFM stores bottom row first
    return np.ascontiguousarray(arr[::-1]).astype(np.float32)


def write_pfm(path: Path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float32)
    h, w = values.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    payload = np.ascontiguousarray(values[::-1]).astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------------------
# Sequence I/O
# ---------------------------------------------------------------------------

def _numeric_key(p: Path):
    m = re.search(r"(\d+)", p.stem)
    return (int(m.group(1)) if m else -1, p.name)


def _list_sequence(directory: Path, exts: tuple) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    files = sorted(
        (p for p in directory.iterdir() if p.suffix.lower() in exts),
        key=_numeric_key,
    )
    if not files:
        raise DataError(f"no {'/'.join(exts)} files in {directory}")
    return files


def read_meta(directory: Path) -> ClipMeta:
    meta = ClipMeta()
    path = Path(directory) / _META_NAME
    if not path.exists():
        return meta
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "frame_rate":
            meta.frame_rate = float(value)
        elif key == "disparity_scale":
            meta.disparity_scale = float(value)
        else:
            meta.extra[key] = value
    return meta


def write_meta(directory: Path, meta: ClipMeta) -> None:
    lines = [f"frame_rate={meta.frame_rate}", f"disparity_scale={meta.disparity_scale}"]
    lines += [f"{k}={v}" for k, v in sorted(meta.extra.items())]
    (Path(directory) / _META_NAME).write_text("\n".join(lines) + "\n")


def _decode_rgb(path: Path) -> Frame:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"unreadable image: {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    rgb = raw[:, :, ::-1]  # BGR -> RGB
    full = 65535.0 if raw.dtype == np.uint16 else 255.0
    linear = srgb_to_linear(rgb.astype(np.float64) / full)
    return Frame(np.clip(linear, 0.0, 1.0).astype(np.float32))


def _decode_disparity(path: Path) -> DisparityMap:
    if path.suffix.lower() == ".pfm":
        values = read_pfm(path)
    else:
        raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise DataError(f"unreadable image: {path}")
        if raw.ndim == 3:
            raw = raw[:, :, 0]
        full = 65535.0 if raw.dtype == np.uint16 else 255.0
        values = raw.astype(np.float32) / np.float32(full)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite disparity values")
    if not np.all(values > 0):
        raise DataError(f"{path}: non-positive disparity values")
    return DisparityMap(values)


def load_frame_sequence(directory, kind: str = "rgb"):
    """Load a numerically ordered image sequence from a directory.

    kind="rgb" returns a VideoClip (sRGB decoded to linear light).
    kind="disparity" returns a list of DisparityMap; 16-bit gray PNGs map
    to (0, 1] (65535 -> 1.0) and are multiplied by the sidecar
    disparity_scale, .pfm rasters are taken as-is.
    """
    directory = Path(directory)
    meta = read_meta(directory)
    if kind == "rgb":
        files = _list_sequence(directory, (".png",))
        frames = [_decode_rgb(p) for p in files]
        first = (frames[0].height, frames[0].width)
        for p, f in zip(files, frames):
            if (f.height, f.width) != first:
                raise DataError(f"{p}: dimensions {f.width}x{f.height} differ from first frame")
        return VideoClip(tuple(frames), frame_rate=meta.frame_rate)
    if kind == "disparity":
        files = _list_sequence(directory, (".png", ".pfm"))
        maps = []
        for p in files:
            d = _decode_disparity(p)
            if p.suffix.lower() != ".pfm" and meta.disparity_scale != 1.0:
                d = DisparityMap(d.values * np.float32(meta.disparity_scale))
            maps.append(d)
        shapes = {(m.height, m.width) for m in maps}
        if len(shapes) > 1:
            raise DataError(f"mixed disparity dimensions in {directory}: {sorted(shapes)}")
        return maps
    raise ValueError(f"unknown kind {kind!r}")


def save_frame_sequence(clip: VideoClip, directory, bit_depth: int = EIGHT_BIT) -> None:
    """Write a clip as frame_%05d.png (sRGB encoded) plus the meta sidecar."""
    if bit_depth not in (EIGHT_BIT, SIXTEEN_BIT):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    full = 255.0 if bit_depth == EIGHT_BIT else 65535.0
    dtype = np.uint8 if bit_depth == EIGHT_BIT else np.uint16
    for t, frame in enumerate(clip.frames):
        srgb = linear_to_srgb(frame.pixels.astype(np.float64))
        coded = np.clip(np.rint(srgb * full), 0, full).astype(dtype)
        path = directory / (_FRAME_NAME % t)
        if not cv2.imwrite(str(path), coded[:, :, ::-1]):
            raise DataError(f"failed to write {path}")
    write_meta(directory, ClipMeta(frame_rate=clip.frame_rate))


def save_disparity_sequence(maps, directory, fmt: str = "pfm") -> None:
    """Write disparity as .pfm (exact) or 16-bit gray PNG scaled by the clip max."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if fmt == "pfm":
        for t, d in enumerate(maps):
            write_pfm(directory / f"frame_{t:05d}.pfm", d.values)
        write_meta(directory, ClipMeta(disparity_scale=1.0))
    elif fmt == "png16":
        scale = max(float(d.values.max()) for d in maps)
        for t, d in enumerate(maps):
            coded = np.clip(np.rint(d.values / scale * 65535.0), 1, 65535).astype(np.uint16)
            path = directory / (_FRAME_NAME % t)
            if not cv2.imwrite(str(path), coded):
                raise DataError(f"failed to write {path}")
        write_meta(directory, ClipMeta(disparity_scale=scale))
    else:
        raise ValueError(f"unknown disparity format {fmt!r}")
