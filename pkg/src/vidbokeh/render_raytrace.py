"""Thin-lens Monte Carlo reference renderer for layered planar scenes.

This is the ground-truth bokeh generator: slow, simple, and physically
grounded.  Each pixel averages many lens samples; each sample intersects
every planar-disparity layer in closed form and composites front to back
with the over operator.

Geometry.  A layer's disparity is a plane over normalized coordinates,
``d(X, Y) = (1 - a X - b Y) / c`` with ``X = (x + 0.5) / W``.  A lens
offset (u, v), drawn uniformly on a disk of radius K, displaces the query
into a layer by ``(u, v) * (d - d_f)`` pixels, the parallax consistent with
the circle-of-confusion law r = K|d - d_f|.  For the intersection disparity
this gives a linear equation with the closed-form solution

    d_hit = (c * d_pixel + g * d_f) / (c + g),   g = a u / W + b v / H.

Layers are sampled bilinearly at the shifted coordinates with edge clamping
(no dark fringes at borders).  Sampling is keyed by (seed, frame, pixel,
sample) so output is bit-deterministic under any execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vidbokeh.core_model import DataError, DisparityMap, Frame, FocalSpec, VideoClip
from vidbokeh.sampling import lens_points

DEFAULT_SAMPLES_PER_PIXEL = 128


@dataclass(frozen=True)
class PlanarLayer:
    """RGBA raster (premultiplied, linear light) with a planar disparity."""

    rgba: np.ndarray  # (H, W, 4) float32
    plane: tuple      # (a, b, c), c != 0

    def __post_init__(self):
        rgba = np.ascontiguousarray(np.asarray(self.rgba, dtype=np.float32))
        if rgba.ndim != 3 or rgba.shape[2] != 4:
            raise DataError(f"layer must be (H, W, 4), got {rgba.shape}")
        alpha = rgba[:, :, 3]
        if np.any(alpha < 0) or np.any(alpha > 1):
            raise DataError("layer alpha must lie in [0, 1]")
        a, b, c = (float(v) for v in self.plane)
        if c == 0.0:
            raise DataError("plane coefficient c must be nonzero")
        rgba.flags.writeable = False
        object.__setattr__(self, "rgba", rgba)
        object.__setattr__(self, "plane", (a, b, c))

    def disparity_grid(self, height: int, width: int) -> np.ndarray:
        """Plane disparity evaluated at every pixel center, (H, W) float64."""
        a, b, c = self.plane
        X = (np.arange(width, dtype=np.float64) + 0.5) / width
        Y = (np.arange(height, dtype=np.float64) + 0.5) / height
        return (1.0 - a * X[None, :] - b * Y[:, None]) / c


@dataclass(frozen=True)
class PlanarScene:
    """Front-to-back ordered layers over a fixed pixel grid.

    The last layer is the fully opaque background; depth at the image
    center must strictly increase front to back (disparity decreases).
    """

    layers: tuple
    width: int
    height: int

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DataError("scene needs at least one layer")
        for i, layer in enumerate(layers):
            if layer.rgba.shape[:2] != (self.height, self.width):
                raise DataError(f"layer {i} raster does not match scene dimensions")
            d = layer.disparity_grid(self.height, self.width)
            if not np.all(np.isfinite(d)) or np.any(d <= 0):
                raise DataError(f"layer {i} plane must give finite positive disparity everywhere")
        if not np.all(layers[-1].rgba[:, :, 3] == 1.0):
            raise DataError("background layer must be fully opaque")
        centers = [self._center_disparity(l) for l in layers]
        if any(back >= front for front, back in zip(centers[:-1], centers[1:])):
            raise DataError("layers must be ordered front to back (center disparity decreasing)")
        object.__setattr__(self, "layers", layers)

    def _center_disparity(self, layer: PlanarLayer) -> float:
        a, b, c = layer.plane
        return (1.0 - 0.5 * a - 0.5 * b) / c


@dataclass(frozen=True)
class LensConfig:
    """Lens radius K in disparity-blur units (r = K * |d - d_f|), ray count, seed."""

    K: float
    samples_per_pixel: int = DEFAULT_SAMPLES_PER_PIXEL
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_pixel < 1:
            raise DataError("samples_per_pixel must be >= 1")
        if not np.isfinite(self.K) or self.K < 0:
            raise DataError("lens radius K must be finite and >= 0")


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear lookup of (H, W, C) at float coordinates, clamped to edges."""
    h, w = img.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = (xs - x0)[..., None]
    ty = (ys - y0)[..., None]
    v00 = img[y0, x0]
    v01 = img[y0, x1]
    v10 = img[y1, x0]
    v11 = img[y1, x1]
    top = v00 + (v01 - v00) * tx
    bot = v10 + (v11 - v10) * tx
    return top + (bot - top) * ty


def _composite_over(samples: list) -> np.ndarray:
    """Front-to-back over on premultiplied RGBA samples; returns (H, W, 3)."""
    acc = np.zeros(samples[0].shape[:2] + (3,), dtype=np.float64)
    transmittance = np.ones(samples[0].shape[:2], dtype=np.float64)
    for rgba in samples:
        acc += transmittance[..., None] * rgba[..., :3]
        transmittance = transmittance * (1.0 - rgba[..., 3])
    return acc


def _pinhole(scene: PlanarScene) -> np.ndarray:
    return _composite_over([l.rgba.astype(np.float64) for l in scene.layers])


def render_reference(scene: PlanarScene, focal: FocalSpec, lens: LensConfig,
                     frame_index: int = 0) -> Frame:
    """Monte Carlo thin-lens render of a planar scene.

    K = 0 collapses to the exact pinhole composite with no sampling.
    """
    h, w = scene.height, scene.width
    if lens.K == 0.0:
        return Frame(np.clip(_pinhole(scene), 0.0, 1.0).astype(np.float32))

    d_f = focal.d_f
    px = np.arange(w, dtype=np.float64)[None, :].repeat(h, axis=0)
    py = np.arange(h, dtype=np.float64)[:, None].repeat(w, axis=1)
    grids = [layer.disparity_grid(h, w) for layer in scene.layers]

    acc = np.zeros((h, w, 3), dtype=np.float64)
    for s in range(lens.samples_per_pixel):
        ux, uy = lens_points(lens.seed, frame_index, s, h, w)
        u = lens.K * ux
        v = lens.K * uy
        sample_rgba = []
        for layer, d_p in zip(scene.layers, grids):
            a, b, c = layer.plane
            g = a * u / w + b * v / h
            denom = c + g
            # grazing samples fall back to the pixel's own plane disparity
            safe = np.abs(denom) > 1e-12
            d_hit = np.where(safe, (c * d_p + g * d_f) / np.where(safe, denom, 1.0), d_p)
            shift = d_hit - d_f
            sample_rgba.append(bilinear_sample(layer.rgba, px + u * shift, py + v * shift))
        acc += _composite_over(sample_rgba)
    acc /= lens.samples_per_pixel
    return Frame(np.clip(acc, 0.0, 1.0).astype(np.float32))


def render_reference_clip(scenes, focal: FocalSpec, lens: LensConfig) -> VideoClip:
    """Render one scene per frame; stream keys include the frame index."""
    scenes = list(scenes)
    if not scenes:
        raise DataError("no scenes to render")
    dims = {(s.width, s.height) for s in scenes}
    if len(dims) > 1:
        raise DataError(f"mixed scene dimensions: {sorted(dims)}")
    frames = [render_reference(scene, focal, lens, frame_index=t)
              for t, scene in enumerate(scenes)]
    return VideoClip(tuple(frames))


# ---------------------------------------------------------------------------
# Gather variant for arbitrary per-pixel disparity
# ---------------------------------------------------------------------------

def render_gather_frame(frame: Frame, disparity: DisparityMap, focal: FocalSpec,
                        lens: LensConfig, frame_index: int = 0) -> Frame:
    """Thin-lens Monte Carlo gather over a single frame with free-form disparity.

    Without layering there is no exact intersection, so the query point is
    refined by two fixed-point passes of shift = lens * (d(q) - d_f).  Exact
    for locally constant disparity; K = 0 is the identity.
    """
    if frame.pixels.shape[:2] != disparity.values.shape:
        raise DataError("frame and disparity dimensions differ")
    if lens.K == 0.0:
        return frame
    h, w = frame.height, frame.width
    d_f = focal.d_f
    px = np.arange(w, dtype=np.float64)[None, :].repeat(h, axis=0)
    py = np.arange(h, dtype=np.float64)[:, None].repeat(w, axis=1)
    dvals = disparity.values.astype(np.float64)[..., None]
    img = frame.pixels
    acc = np.zeros((h, w, 3), dtype=np.float64)
    for s in range(lens.samples_per_pixel):
        ux, uy = lens_points(lens.seed, frame_index, s, h, w)
        u = lens.K * ux
        v = lens.K * uy
        shift = dvals[..., 0] - d_f
        for _ in range(2):
            d_q = bilinear_sample(dvals, px + u * shift, py + v * shift)[..., 0]
            shift = d_q - d_f
        acc += bilinear_sample(img, px + u * shift, py + v * shift)
    acc /= lens.samples_per_pixel
    return Frame(np.clip(acc, 0.0, 1.0).astype(np.float32))


def render_gather_clip(clip: VideoClip, disparities, focal: FocalSpec,
                       lens: LensConfig) -> VideoClip:
    disparities = list(disparities)
    if len(disparities) != len(clip):
        raise DataError("clip and disparity sequence lengths differ")
    frames = [render_gather_frame(f, d, focal, lens, frame_index=t)
              for t, (f, d) in enumerate(zip(clip.frames, disparities))]
    return VideoClip(tuple(frames), frame_rate=clip.frame_rate)
