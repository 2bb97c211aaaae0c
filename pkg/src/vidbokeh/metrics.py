"""Classical image and video quality metrics.

All metrics operate on linear-light [0, 1] frames.  Score conventions:

    psnr          dB, +inf for identical inputs
    ssim          [-1, 1], luma-only, 11x11 Gaussian window
    rm            >= 0, discrepancy of adjacent-frame temporal differences
    vepi          [-1, 1], correlation of Laplacian responses over an ROI
    texture_loss  >= 0, squared mismatch of forward-difference gradients
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .core_model import DataError, Frame, VideoClip

# Rec. 709 luma weights, applied to linear RGB.
_LUMA = np.array([0.2126, 0.7152, 0.0722], dtype=np.float64)

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

_LAPLACIAN = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)

METRIC_NAMES = ("psnr", "ssim", "rm", "vepi", "texture_loss")


@dataclass(frozen=True)
class RoiMask:
    """Boolean raster marking the region a sharpness metric should inspect."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=bool)
        if v.ndim != 2:
            raise DataError("ROI mask must be a 2-D boolean raster")
        if not v.any():
            raise DataError("ROI mask must select at least one pixel")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class MetricReport:
    """Scores for whichever metrics were requested; absent ones stay None."""

    psnr: Optional[float] = None
    ssim: Optional[float] = None
    rm: Optional[float] = None
    vepi: Optional[float] = None
    texture_loss: Optional[float] = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _pixels(frame) -> np.ndarray:
    if isinstance(frame, Frame):
        return frame.pixels.astype(np.float64)
    return np.asarray(frame, dtype=np.float64)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DataError(f"frame dimensions differ: {a.shape} vs {b.shape}")


def luma(frame) -> np.ndarray:
    """Rec. 709 luma of a linear-light RGB frame, (H, W) float64."""
    px = _pixels(frame)
    if px.ndim == 2:
        return px
    return px @ _LUMA


def psnr(pred, gt) -> float:
    """Peak signal-to-noise ratio in dB over [0, 1] channels; inf if equal."""
    p, g = _pixels(pred), _pixels(gt)
    _check_pair(p, g)
    mse = float(np.mean((p - g) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    return g / g.sum()


def _windowed(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(img, win, axis=0, mode="nearest")
    return ndimage.correlate1d(out, win, axis=1, mode="nearest")


def ssim(pred, gt) -> float:
    """Mean structural similarity on luma, valid 11x11 windows only."""
    p, g = luma(pred), luma(gt)
    _check_pair(p, g)
    if min(p.shape) < _SSIM_WINDOW:
        raise DataError(f"frames must be at least {_SSIM_WINDOW} px on each side")
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_p = _windowed(p, win)
    mu_g = _windowed(g, win)
    var_p = _windowed(p * p, win) - mu_p**2
    var_g = _windowed(g * g, win) - mu_g**2
    cov = _windowed(p * g, win) - mu_p * mu_g
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    num = (2.0 * mu_p * mu_g + c1) * (2.0 * cov + c2)
    den = (mu_p**2 + mu_g**2 + c1) * (var_p + var_g + c2)
    ssim_map = num / den
    # drop the half-window border so only fully supported windows count
    h = _SSIM_WINDOW // 2
    return float(ssim_map[h:-h, h:-h].mean())


def _clip_array(clip) -> np.ndarray:
    if isinstance(clip, VideoClip):
        return np.stack([f.pixels.astype(np.float64) for f in clip.frames])
    return np.asarray(clip, dtype=np.float64)


def rm(pred, gt) -> float:
    """Mean absolute discrepancy between adjacent-frame differences."""
    p, g = _clip_array(pred), _clip_array(gt)
    if p.shape != g.shape:
        raise DataError(f"clip shapes differ: {p.shape} vs {g.shape}")
    if p.shape[0] < 2:
        raise DataError("temporal metric needs at least 2 frames")
    return float(np.mean(np.abs(np.diff(p, axis=0) - np.diff(g, axis=0))))


def rm_solo(pred) -> float:
    """Mean absolute adjacent-frame difference of a single clip."""
    p = _clip_array(pred)
    if p.shape[0] < 2:
        raise DataError("temporal metric needs at least 2 frames")
    return float(np.mean(np.abs(np.diff(p, axis=0))))


def vepi(pred, ref, roi: RoiMask) -> float:
    """Correlation of Laplacian edge responses between pred and ref over ROI.

    1.0 means edges inside the region survived untouched; a flat or
    otherwise variance-free response on either side is degenerate and
    scores 0 with a warning.
    """
    p, r = luma(pred), luma(ref)
    _check_pair(p, r)
    m = roi.values
    if m.shape != p.shape:
        raise DataError(f"ROI shape {m.shape} does not match frame {p.shape}")
    lp = ndimage.convolve(p, _LAPLACIAN, mode="nearest")[m]
    lr = ndimage.convolve(r, _LAPLACIAN, mode="nearest")[m]
    lp = lp - lp.mean()
    lr = lr - lr.mean()
    denom = math.sqrt(float(lp @ lp) * float(lr @ lr))
    if denom == 0.0:
        warnings.warn("zero-variance Laplacian response in ROI, edge score degenerates to 0")
        return 0.0
    return float((lp @ lr) / denom)


def texture_loss(pred, gt, normalize: bool = False) -> float:
    """Squared mismatch of forward-difference image gradients."""
    p, g = _pixels(pred), _pixels(gt)
    _check_pair(p, g)
    loss = float(np.sum((np.diff(p, axis=1) - np.diff(g, axis=1)) ** 2))
    loss += float(np.sum((np.diff(p, axis=0) - np.diff(g, axis=0)) ** 2))
    if normalize:
        loss /= p.shape[0] * p.shape[1]
    return loss


def evaluate_clip_pair(
    pred: VideoClip,
    gt: VideoClip,
    rois: Optional[Sequence[RoiMask]] = None,
    metrics: Sequence[str] = ("psnr", "ssim", "rm"),
    rm_mode: str = "paired",
) -> MetricReport:
    """Score a rendered clip against ground truth.

    Frame metrics are averaged over frames (a PSNR of +inf on any frame
    makes the average +inf); rm is computed clip-wise.  VEPI needs one
    ROI per frame.
    """
    unknown = set(metrics) - set(METRIC_NAMES)
    if unknown:
        raise DataError(f"unknown metrics: {sorted(unknown)}")
    if len(pred) != len(gt):
        raise DataError("clips must have equal length")
    if rm_mode not in ("paired", "solo"):
        raise DataError("rm_mode must be 'paired' or 'solo'")
    if "vepi" in metrics:
        if rois is None:
            raise DataError("vepi requested but no ROI masks given")
        if len(rois) != len(pred):
            raise DataError("need one ROI mask per frame")

    values: dict = {}
    if "psnr" in metrics:
        per = [psnr(p, g) for p, g in zip(pred.frames, gt.frames)]
        values["psnr"] = math.inf if any(math.isinf(v) for v in per) else float(np.mean(per))
    if "ssim" in metrics:
        values["ssim"] = float(np.mean([ssim(p, g) for p, g in zip(pred.frames, gt.frames)]))
    if "rm" in metrics:
        values["rm"] = rm(pred, gt) if rm_mode == "paired" else rm_solo(pred)
    if "vepi" in metrics:
        values["vepi"] = float(
            np.mean([vepi(p, g, m) for p, g, m in zip(pred.frames, gt.frames, rois)])
        )
    if "texture_loss" in metrics:
        values["texture_loss"] = float(
            np.mean([texture_loss(p, g) for p, g in zip(pred.frames, gt.frames)])
        )
    return MetricReport(**values)
