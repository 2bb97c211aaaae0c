"""Shared fixtures: textured frames, layered test scenes, a tiny dataset."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
import pytest

from vidbokeh.core_model import DisparityMap, Frame, VideoClip, srgb_to_linear
from vidbokeh.dataset_gen import AssetCatalog, GeneratorConfig, generate_testset, write_demo_assets
from vidbokeh.render_raytrace import PlanarLayer, PlanarScene


def smooth_texture(seed: int, h: int, w: int, channels: int = 3, cells: int = 8) -> np.ndarray:
    """Band-limited random texture in [0, 1]: upsampled coarse noise."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0.08, 0.92, size=(cells, cells, channels)).astype(np.float32)
    up = cv2.resize(coarse, (w, h), interpolation=cv2.INTER_CUBIC)
    if up.ndim == 2:
        up = up[..., None]
    return np.clip(up, 0.0, 1.0).astype(np.float32)


def lattice_frame(seed: int, h: int, w: int) -> Frame:
    """Frame whose linear values sit exactly on the 8-bit sRGB code lattice."""
    rng = np.random.default_rng(seed)
    coded = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    return Frame(srgb_to_linear(coded / 255.0).astype(np.float32))


def lattice_clip(seed: int, t: int, h: int, w: int) -> VideoClip:
    return VideoClip(tuple(lattice_frame(seed * 1000 + i, h, w) for i in range(t)))


def plane_through(rng: np.random.Generator, center_disparity: float, tilt: float) -> tuple:
    """Random (a, b, c) whose disparity at the image center is center_disparity."""
    a = float(rng.uniform(-tilt, tilt))
    b = float(rng.uniform(-tilt, tilt))
    c = (1.0 - 0.5 * a - 0.5 * b) / center_disparity
    return (a, b, c)


@dataclass(frozen=True)
class TwoPlaneCase:
    """A foreground blob over an opaque background, plus derived ground truth."""

    scene: PlanarScene
    frame: Frame            # pinhole composite
    disparity: DisparityMap # front-surface disparity (alpha > 0.5 wins)
    fg_alpha: np.ndarray    # (H, W) float32
    d_fg: float             # foreground center disparity
    d_bg: float             # background center disparity


def build_two_plane(seed: int, h: int, w: int, tilt: float = 0.04) -> TwoPlaneCase:
    rng = np.random.default_rng(seed)
    bg_rgb = smooth_texture(seed * 7 + 1, h, w)
    fg_rgb = smooth_texture(seed * 7 + 2, h, w)
    d_bg = float(rng.uniform(0.25, 0.45))
    d_fg = d_bg * float(rng.uniform(1.9, 2.6))
    bg_plane = plane_through(rng, d_bg, tilt)
    fg_plane = plane_through(rng, d_fg, tilt)

    cy, cx = rng.uniform(0.35, 0.65, size=2)
    ry, rx = rng.uniform(0.16, 0.3, size=2)
    edge = float(rng.uniform(0.06, 0.18))
    Y, X = np.mgrid[0:h, 0:w].astype(np.float64)
    dist = np.sqrt((((X + 0.5) / w - cx) / rx) ** 2 + (((Y + 0.5) / h - cy) / ry) ** 2)
    alpha = np.clip((1.0 - dist) / edge, 0.0, 1.0).astype(np.float32)

    fg_rgba = np.concatenate([fg_rgb * alpha[..., None], alpha[..., None]], axis=2)
    bg_rgba = np.concatenate([bg_rgb, np.ones((h, w, 1), np.float32)], axis=2)
    fg_layer = PlanarLayer(fg_rgba, fg_plane)
    bg_layer = PlanarLayer(bg_rgba, bg_plane)
    scene = PlanarScene((fg_layer, bg_layer), width=w, height=h)

    pinhole = fg_rgba[..., :3] + (1.0 - alpha[..., None]) * bg_rgb
    front = np.where(
        alpha > 0.5,
        fg_layer.disparity_grid(h, w),
        bg_layer.disparity_grid(h, w),
    ).astype(np.float32)
    return TwoPlaneCase(
        scene=scene,
        frame=Frame(np.clip(pinhole, 0.0, 1.0)),
        disparity=DisparityMap(front),
        fg_alpha=alpha,
        d_fg=d_fg,
        d_bg=d_bg,
    )


@pytest.fixture(scope="session")
def demo_assets(tmp_path_factory) -> AssetCatalog:
    root = tmp_path_factory.mktemp("assets")
    write_demo_assets(root, seed=11)
    return AssetCatalog.scan(root)


SMALL_SET_CONFIG = GeneratorConfig(
    width=192, height=108, frames=5, samples_per_pixel=24, layer_count=8, workers=1
)
SMALL_SET_SEED = 77


@pytest.fixture(scope="session")
def small_testset(tmp_path_factory, demo_assets):
    """Three tiny generated videos shared by dataset, CLI and service tests."""
    out = tmp_path_factory.mktemp("testset")
    manifest = generate_testset(3, demo_assets, SMALL_SET_SEED, out, SMALL_SET_CONFIG)
    return out, manifest
