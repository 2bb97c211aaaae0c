"""Disparity perturbations for robustness testing.

Three corruption families, all deterministic in their seed and all
preserving strictly positive disparity:

  * elastic warp: resample through a smooth random displacement field,
  * gradient-lattice noise: add band-limited value noise,
  * grey-scale morphology: exaggerate boundary transitions.

A named preset bundles one setting of each so robustness runs are
reproducible; by default a clip is perturbed with probability 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core_model import DataError, DisparityMap
from .sampling import derive_seed

_MIN_DISPARITY = 1e-6

MORPH_OPS = ("dilate", "erode", "open", "close")

stage2_default = "stage2-default"


def elastic_displacement(shape, alpha: float, sigma: float, seed: int):
    """The (dy, dx) fields an elastic warp of this seed will sample through.

    Uniform noise in [-1, 1] is Gaussian-smoothed (which keeps it inside
    [-1, 1]) and scaled by alpha, so no pixel moves further than alpha.
    Exposed separately so callers can bound or visualize the warp.
    """
    if alpha < 0:
        raise DataError("alpha must be >= 0")
    if sigma <= 0:
        raise DataError("sigma must be > 0")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-1.0, 1.0, size=(2,) + tuple(shape))
    dy = alpha * ndimage.gaussian_filter(raw[0], sigma)
    dx = alpha * ndimage.gaussian_filter(raw[1], sigma)
    return dy, dx


def elastic_transform(
    disparity: DisparityMap, alpha: float, sigma: float, seed: int
) -> DisparityMap:
    """Locally distort a disparity map by warping it through smooth noise."""
    dy, dx = elastic_displacement(disparity.values.shape, alpha, sigma, seed)
    if alpha == 0:
        return DisparityMap(disparity.values.copy())
    h, w = disparity.values.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    warped = ndimage.map_coordinates(
        disparity.values.astype(np.float64), [ys + dy, xs + dx], order=1, mode="nearest"
    )
    return DisparityMap(np.maximum(warped, _MIN_DISPARITY).astype(np.float32))


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin_field(shape, scale: float, seed: int) -> np.ndarray:
    """Classic 2-D gradient-lattice noise in [-1, 1], zero at lattice points.

    One lattice cell spans ``scale`` pixels; pixel (x, y) samples the
    field at (x / scale, y / scale).  Gradients are unit vectors drawn
    from a seeded permutation, corner contributions are blended with the
    quintic fade 6t^5 - 15t^4 + 10t^3, and the result is scaled by
    sqrt(2) so the theoretical extrema reach exactly +/-1.
    """
    if scale < 2:
        raise DataError("scale must be >= 2 pixels per lattice cell")
    h, w = shape
    rng = np.random.default_rng(seed)
    perm = rng.permutation(256)
    perm = np.concatenate([perm, perm])
    angles = rng.uniform(0.0, 2.0 * np.pi, size=256)
    grad = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    xs = np.arange(w, dtype=np.float64) / scale
    ys = np.arange(h, dtype=np.float64) / scale
    X, Y = np.meshgrid(xs, ys)
    xi = np.floor(X).astype(np.int64)
    yi = np.floor(Y).astype(np.int64)
    xf = X - xi
    yf = Y - yi

    def corner_dot(ox: int, oy: int) -> np.ndarray:
        g = grad[perm[perm[(xi + ox) & 255] + ((yi + oy) & 255)]]
        return g[..., 0] * (xf - ox) + g[..., 1] * (yf - oy)

    u = _fade(xf)
    v = _fade(yf)
    top = corner_dot(0, 0) + u * (corner_dot(1, 0) - corner_dot(0, 0))
    bot = corner_dot(0, 1) + u * (corner_dot(1, 1) - corner_dot(0, 1))
    return np.sqrt(2.0) * (top + v * (bot - top))


def perlin_noise_add(
    disparity: DisparityMap, amplitude: float, scale: float, seed: int
) -> DisparityMap:
    """Add band-limited lattice noise to a disparity map, keeping it > 0."""
    if amplitude < 0:
        raise DataError("amplitude must be >= 0")
    noise = perlin_field(disparity.values.shape, scale, seed)
    out = disparity.values.astype(np.float64) + amplitude * noise
    if np.all(out <= 0):
        raise DataError("noise amplitude drives the whole map non-positive")
    return DisparityMap(np.maximum(out, _MIN_DISPARITY).astype(np.float32))


def _disk_footprint(radius: int) -> np.ndarray:
    r = int(radius)
    ax = np.arange(-r, r + 1)
    return (ax[None, :] ** 2 + ax[:, None] ** 2) <= r * r


def morphological(disparity: DisparityMap, op: str, radius: int) -> DisparityMap:
    """Grey-scale morphology with a disk structuring element.

    dilate takes the neighborhood max (fattens near surfaces), erode the
    min; open = erode then dilate, close = dilate then erode.
    """
    if op not in MORPH_OPS:
        raise DataError(f"unknown morphological op {op!r}")
    if radius < 1:
        raise DataError("radius must be >= 1")
    footprint = _disk_footprint(radius)
    fn = {
        "dilate": ndimage.grey_dilation,
        "erode": ndimage.grey_erosion,
        "open": ndimage.grey_opening,
        "close": ndimage.grey_closing,
    }[op]
    out = fn(disparity.values, footprint=footprint)
    return DisparityMap(np.maximum(out, _MIN_DISPARITY).astype(np.float32))


@dataclass(frozen=True)
class PerturbationPreset:
    """One setting of each corruption family, applied as a fixed pipeline.

    Noise amplitude is relative: the absolute amplitude is
    perlin_rel_amplitude times the clip's disparity range, so the preset
    scales with whatever units the clip uses.
    """

    name: str
    elastic_alpha: float = 6.0
    elastic_sigma: float = 4.0
    perlin_rel_amplitude: float = 0.05
    perlin_scale: float = 32.0
    morph_op: str = "close"
    morph_radius: int = 2
    probability: float = 0.5


PRESETS = {
    stage2_default: PerturbationPreset(name=stage2_default),
}


def perturb_map(
    disparity: DisparityMap, preset: PerturbationPreset, amplitude: float, seed: int
) -> DisparityMap:
    """Run the preset pipeline (warp, noise, morphology) on one map."""
    out = elastic_transform(disparity, preset.elastic_alpha, preset.elastic_sigma, seed)
    out = perlin_noise_add(out, amplitude, preset.perlin_scale, derive_seed(seed, 1))
    return morphological(out, preset.morph_op, preset.morph_radius)


def apply_preset(
    disparities,
    seed: int,
    preset: str = stage2_default,
    probability: float = None,
) -> list:
    """Perturb a clip's disparity sequence with one coin flip per clip.

    The same displacement and noise fields apply to every frame, so the
    corruption is temporally consistent the way a miscalibrated
    estimator would be.  Returns copies when the coin leaves the clip
    clean; pass probability=1.0 to force perturbation.
    """
    maps = list(disparities)
    if not maps:
        raise DataError("need at least one disparity map")
    if preset not in PRESETS:
        raise DataError(f"unknown preset {preset!r}")
    cfg = PRESETS[preset]
    p = cfg.probability if probability is None else probability
    rng = np.random.default_rng(seed)
    if rng.random() >= p:
        return [DisparityMap(m.values.copy()) for m in maps]
    lo = min(float(m.values.min()) for m in maps)
    hi = max(float(m.values.max()) for m in maps)
    amplitude = cfg.perlin_rel_amplitude * (hi - lo)
    field_seed = derive_seed(seed, 0)
    if amplitude == 0.0:
        # flat clip: noise would be a no-op at relative amplitude, skip it
        out = []
        for m in maps:
            warped = elastic_transform(m, cfg.elastic_alpha, cfg.elastic_sigma, field_seed)
            out.append(morphological(warped, cfg.morph_op, cfg.morph_radius))
        return out
    return [perturb_map(m, cfg, amplitude, field_seed) for m in maps]
