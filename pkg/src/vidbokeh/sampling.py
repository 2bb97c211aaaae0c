"""Counter-based deterministic random sampling.

A splitmix64 finalizer hashes (seed, frame, pixel, sample) keys straight to
uniforms, so any pixel of any frame can be evaluated in isolation, in any
order, on any number of workers, and still produce bit-identical output.
Lens points use Shirley-Chiu concentric disk mapping, which is low-distortion
and needs no square root.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x) -> np.ndarray:
    """Finalizing hash of uint64 values (scalar or array); wraparound intended."""
    with np.errstate(over="ignore"):
        x = (np.asarray(x, dtype=np.uint64) + _GOLDEN) & _MASK
        x = ((x ^ (x >> np.uint64(30))) * _MIX1) & _MASK
        x = ((x ^ (x >> np.uint64(27))) * _MIX2) & _MASK
        return x ^ (x >> np.uint64(31))


def fold(state, value) -> np.ndarray:
    """Absorb one key component into a hash state."""
    return splitmix64(np.asarray(state, dtype=np.uint64) ^ np.asarray(value, dtype=np.uint64))


def derive_seed(master_seed: int, index: int) -> int:
    """Stable per-item seed from a master seed and a counter."""
    return int(fold(np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), np.uint64(index)))


def unit_floats(h: np.ndarray) -> np.ndarray:
    """Map hashed uint64 values to float64 uniforms in [0, 1)."""
    return (h >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def concentric_disk(u1: np.ndarray, u2: np.ndarray):
    """Map unit-square uniforms to uniform points on the unit disk.

    Shirley-Chiu mapping: the dominant coordinate becomes the radius
    directly, the other sets the angle within the octant.
    """
    a = 2.0 * u1 - 1.0
    b = 2.0 * u2 - 1.0
    abs_a, abs_b = np.abs(a), np.abs(b)
    use_a = abs_a > abs_b
    r = np.where(use_a, a, b)
    safe_a = np.where(abs_a > 0, a, 1.0)
    safe_b = np.where(abs_b > 0, b, 1.0)
    theta = np.where(use_a, (np.pi / 4.0) * (b / safe_a),
                     (np.pi / 2.0) - (np.pi / 4.0) * (a / safe_b))
    origin = (abs_a == 0) & (abs_b == 0)
    x = np.where(origin, 0.0, r * np.cos(theta))
    y = np.where(origin, 0.0, r * np.sin(theta))
    return x, y


def lens_points(seed: int, frame_index: int, sample_index: int,
                height: int, width: int):
    """Per-pixel lens offsets on the unit disk for one sample pass.

    Keyed by (seed, frame, y, x, sample); returns two (H, W) float64 arrays.
    """
    base = fold(fold(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(frame_index)),
                np.uint64(sample_index))
    idx = np.arange(height * width, dtype=np.uint64).reshape(height, width)
    h1 = fold(base, idx)
    h2 = splitmix64(h1)
    return concentric_disk(unit_floats(h1), unit_floats(h2))
