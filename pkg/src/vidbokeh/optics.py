"""Circle-of-confusion optics and focal-plane-adapted layer decomposition.

The blur radius of a point at disparity d under focal disparity d_f and
blur strength K is ``r = K * |d - d_f|``.  Layer thresholds follow a power
schedule ``h_i = (i/N)**e`` with ``e = min(1, 1/d_f)`` (floored at 1e-3 so
the schedule stays strictly increasing for any positive d_f): shallow focus
gets finer sampling near the focal plane.  Mask membership compares the
clip-normalized disparity distance against h_i, so the thresholds, which
live in (0, 1), are commensurable with the distance they gate.

Normalization is per clip, not per frame: a per-frame maximum would
fluctuate over time and inject flicker into everything conditioned on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from vidbokeh.core_model import DataError, DisparityMap, FocalSpec

_EXPONENT_FLOOR = 1e-3


@dataclass(frozen=True)
class ThresholdSchedule:
    """N-1 strictly increasing thresholds in (0, 1) plus the exponent used."""

    N: int
    h: tuple
    exponent: float

    def band_bounds(self, i: int) -> tuple:
        """(lower, upper) normalized-distance bounds of exclusive band i (1-based)."""
        lo = 0.0 if i == 1 else self.h[i - 2]
        hi = 1.0 if i == self.N else self.h[i - 1]
        return lo, hi


@dataclass(frozen=True)
class MpiMask:
    """Nested boolean layers m_1 .. m_N; membership is cumulative and m_N is all-true."""

    layers: np.ndarray  # (N, H, W) bool

    def __post_init__(self):
        m = np.asarray(self.layers, dtype=bool)
        if m.ndim != 3 or m.shape[0] < 2:
            raise DataError(f"mask must be (N>=2, H, W), got {m.shape}")
        object.__setattr__(self, "layers", m)

    @property
    def N(self) -> int:
        return self.layers.shape[0]

    def validate_nesting(self) -> None:
        for i in range(self.N - 1):
            if not np.all(self.layers[i + 1][self.layers[i]]):
                raise DataError(f"mask nesting violated between layers {i + 1} and {i + 2}")
        if not np.all(self.layers[-1]):
            raise DataError("outermost mask layer must be all-true")


@dataclass(frozen=True)
class VDMap:
    """Normalized |d - d_f| in [0, 1]; norm_constant is the clip-wide maximum."""

    values: np.ndarray
    norm_constant: float


def coc_radius(d, focal: FocalSpec, K: float):
    """Blur radius in pixels, K * |d - d_f|.  Accepts scalars or arrays."""
    d = np.asarray(d, dtype=np.float64)
    if not np.all(np.isfinite(d)) or not np.isfinite(K):
        raise DataError("coc_radius requires finite inputs")
    r = K * np.abs(d - focal.d_f)
    return float(r) if r.ndim == 0 else r


def threshold_exponent(focal: FocalSpec) -> float:
    """Effective schedule exponent: 1/d_f clamped to [1e-3, 1]."""
    return float(min(1.0, max(_EXPONENT_FLOOR, 1.0 / focal.d_f)))


def layer_thresholds(N: int, focal: FocalSpec) -> ThresholdSchedule:
    """Focal-adapted thresholds h_i = (i/N)**e for i = 1 .. N-1."""
    if N < 2:
        raise DataError(f"layer count must be >= 2, got {N}")
    e = threshold_exponent(focal)
    h = tuple((i / N) ** e for i in range(1, N))
    return ThresholdSchedule(N=N, h=h, exponent=e)


def disparity_difference_map(disparities, focal: FocalSpec):
    """Per-clip normalized |d - d_f| maps.

    Returns (list of VDMap, norm_constant).  The single normalization
    constant is the maximum of |d - d_f| over every pixel of every frame;
    a clip entirely at the focal plane yields all-zero maps with
    norm_constant 0.
    """
    disparities = list(disparities)
    if not disparities:
        raise DataError("empty disparity sequence")
    diffs = [np.abs(d.values.astype(np.float64) - focal.d_f) for d in disparities]
    norm = max(float(a.max()) for a in diffs)
    if norm <= 0.0:
        maps = [VDMap(np.zeros_like(a, dtype=np.float32), 0.0) for a in diffs]
    else:
        maps = [VDMap((a / norm).astype(np.float32), norm) for a in diffs]
    return maps, norm


def build_mpi_mask(disparity: DisparityMap, focal: FocalSpec, N: int,
                   norm_ref: float) -> MpiMask:
    """Nested layer masks: m_i = {pixels with |d - d_f| / norm_ref < h_i}.

    norm_ref is the clip-wide VDMap norm_constant; callers hold it fixed
    across a clip so masks stay temporally stable.  Layer N is all-true.
    """
    schedule = layer_thresholds(N, focal)
    dist = np.abs(disparity.values.astype(np.float64) - focal.d_f)
    if norm_ref <= 0.0:
        if np.any(dist > 0):
            raise DataError("norm_ref <= 0 but some pixels are off the focal plane")
        scaled = np.zeros_like(dist)
    else:
        scaled = dist / norm_ref
    layers = np.empty((N,) + dist.shape, dtype=bool)
    for i, h in enumerate(schedule.h):
        layers[i] = scaled < h
    layers[N - 1] = True
    return MpiMask(layers)


def exclusive_bands(mask: MpiMask) -> np.ndarray:
    """Disjoint bands from nested layers: band_1 = m_1, band_i = m_i \\ m_{i-1}.

    The bands partition the pixel grid; band index is the first layer that
    contains the pixel.
    """
    mask.validate_nesting()
    m = mask.layers
    bands = np.empty_like(m)
    bands[0] = m[0]
    for i in range(1, mask.N):
        bands[i] = m[i] & ~m[i - 1]
    return bands


# ---------------------------------------------------------------------------
# Debug exports
# ---------------------------------------------------------------------------

def export_vd_png(vd: VDMap, path) -> None:
    """16-bit gray PNG of a VDMap (0 = at the focal plane)."""
    coded = np.clip(np.rint(vd.values.astype(np.float64) * 65535.0), 0, 65535).astype(np.uint16)
    Image.fromarray(coded).save(str(path))


def export_mask_stack(mask: MpiMask, directory) -> list:
    """One 1-bit PNG per layer, layer_01.png .. layer_NN.png."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(mask.N):
        p = directory / f"layer_{i + 1:02d}.png"
        Image.fromarray(mask.layers[i]).convert("1").save(str(p))
        paths.append(p)
    return paths
