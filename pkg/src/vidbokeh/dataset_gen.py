"""Synthetic paired all-in-focus / bokeh clip generation.

Scenes are RGBA foreground sprites drifting on straight 3-D paths over a
planar-disparity background.  Motion in z scales both the sprite and its
disparity plane, so approach reads as growth plus blur change without a
full camera model.  Each scene renders three aligned streams:

    aif        pinhole composite (K = 0)
    bokeh      lens render at the recipe's K and focus
    disparity  plane disparity of the front-most sprite covering each pixel

Everything downstream of a recipe is a pure function of it, and recipes
are a pure function of (catalog, seed), so a master seed fixes every
output byte regardless of worker scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .core_model import (
    DataError,
    DisparityMap,
    FocalSpec,
    Frame,
    BokehParams,
    VideoClip,
    save_disparity_sequence,
    save_frame_sequence,
    srgb_to_linear,
)
from .render_raytrace import LensConfig, PlanarLayer, PlanarScene, render_reference
from .sampling import derive_seed

MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ("id", "path", "d_f", "K", "frames", "seed")


@dataclass(frozen=True)
class TrajectorySpec:
    """Straight-line path of a sprite center: (x px, y px, z relative scale)."""

    start: tuple
    end: tuple
    frames: int = 25

    def __post_init__(self):
        if self.frames < 1:
            raise DataError("trajectory needs at least one frame")
        if len(self.start) != 3 or len(self.end) != 3:
            raise DataError("trajectory endpoints must be (x, y, z)")
        if self.start[2] <= 0 or self.end[2] <= 0:
            raise DataError("z scale must stay positive")
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "end", tuple(float(v) for v in self.end))

    def at(self, t: int) -> tuple:
        """Position at frame t; linear, so in-bounds endpoints stay in bounds."""
        if self.frames == 1:
            return self.start
        w = t / (self.frames - 1)
        return tuple(a + w * (b - a) for a, b in zip(self.start, self.end))


@dataclass(frozen=True)
class ForegroundSpec:
    asset: str
    trajectory: TrajectorySpec
    plane: tuple
    base_width: int


@dataclass(frozen=True)
class SceneRecipe:
    """Everything needed to re-render one scene, replayable from its seed."""

    background: str
    background_plane: tuple
    foregrounds: tuple
    params: BokehParams
    seed: int
    width: int
    height: int

    def __post_init__(self):
        if not self.foregrounds:
            raise DataError("recipe needs at least one foreground")

    @property
    def frames(self) -> int:
        return self.foregrounds[0].trajectory.frames


@dataclass(frozen=True)
class GeneratorConfig:
    width: int = 1024
    height: int = 576
    frames: int = 25
    samples_per_pixel: int = 128
    max_foregrounds: int = 3
    k_range: tuple = (2.0, 30.0)
    layer_count: int = 8
    workers: int = 1


@dataclass(frozen=True)
class AssetCatalog:
    """Directory of RGBA PNG assets: backgrounds/ and foregrounds/."""

    root: Path
    backgrounds: tuple
    foregrounds: tuple

    @classmethod
    def scan(cls, root) -> "AssetCatalog":
        root = Path(root)
        bgs = tuple(sorted((root / "backgrounds").glob("*.png")))
        fgs = tuple(sorted((root / "foregrounds").glob("*.png")))
        if not bgs or not fgs:
            raise DataError(
                f"{root}: need at least one PNG under backgrounds/ and foregrounds/"
            )
        return cls(root=root, backgrounds=bgs, foregrounds=fgs)


def load_rgba(path) -> np.ndarray:
    """Linear-light premultiplied RGBA float32 from a PNG (alpha 1 if absent)."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"{path}: cannot read image")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    raw = raw.astype(np.float64) / scale
    if raw.shape[2] == 4:
        color = srgb_to_linear(raw[:, :, 2::-1])
        alpha = raw[:, :, 3:4]
    else:
        color = srgb_to_linear(raw[:, :, ::-1])
        alpha = np.ones(raw.shape[:2] + (1,))
    return np.concatenate([color * alpha, alpha], axis=2).astype(np.float32)


def _plane_range(plane, z_lo: float = 1.0, z_hi: float = 1.0) -> tuple:
    """Min/max disparity of a (possibly z-scaled) plane over the frame."""
    a, b, c = plane
    corners = [(1.0 - a * x - b * y) / c for x in (0.0, 1.0) for y in (0.0, 1.0)]
    return min(corners) * z_lo, max(corners) * z_hi


def _sample_plane(rng, center_disparity: float, tilt: float) -> tuple:
    a = float(rng.uniform(-tilt, tilt))
    b = float(rng.uniform(-tilt, tilt))
    c = (1.0 - 0.5 * a - 0.5 * b) / center_disparity
    return (a, b, c)


def sample_recipe(assets: AssetCatalog, seed: int, config: GeneratorConfig = GeneratorConfig()) -> SceneRecipe:
    """Draw one scene deterministically from a 64-bit seed."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    bg = assets.backgrounds[int(rng.integers(len(assets.backgrounds)))]
    n_fg = int(rng.integers(1, config.max_foregrounds + 1))

    bg_center = float(rng.uniform(0.25, 0.45))
    bg_plane = _sample_plane(rng, bg_center, tilt=0.1)

    w, h = config.width, config.height
    z_lo, z_hi = 0.9, 1.15
    specs = []
    center = bg_center
    behind_max = _plane_range(bg_plane)[1]
    for _ in range(n_fg):
        center *= float(rng.uniform(1.9, 2.6))
        tilt = 0.05
        plane = _sample_plane(rng, center, tilt)
        # shrink the tilt until this layer stays strictly in front of the
        # one behind it for every frame of the z excursion
        while _plane_range(plane, z_lo=z_lo)[0] <= behind_max:
            tilt /= 2.0
            plane = _sample_plane(rng, center, tilt)
            if tilt < 1e-4:
                plane = (0.0, 0.0, 1.0 / center)
                break
        behind_max = _plane_range(plane, z_hi=z_hi)[1]
        asset = assets.foregrounds[int(rng.integers(len(assets.foregrounds)))]
        base_width = int(round(float(rng.uniform(0.2, 0.45)) * w))
        xs = rng.uniform(0.15 * w, 0.85 * w, size=2)
        ys = rng.uniform(0.15 * h, 0.85 * h, size=2)
        zs = rng.uniform(z_lo, z_hi, size=2)
        traj = TrajectorySpec(
            start=(xs[0], ys[0], zs[0]),
            end=(xs[1], ys[1], zs[1]),
            frames=config.frames,
        )
        specs.append(ForegroundSpec(asset=str(asset), trajectory=traj, plane=plane, base_width=base_width))

    # front of the layer stack first
    specs.sort(key=lambda s: _plane_range(s.plane)[0] * s.trajectory.start[2], reverse=True)

    choices = [(1.0 - 0.5 * bg_plane[0] - 0.5 * bg_plane[1]) / bg_plane[2]]
    for s in specs:
        a, b, c = s.plane
        choices.append((1.0 - 0.5 * a - 0.5 * b) / c * s.trajectory.start[2])
    d_f = float(choices[int(rng.integers(len(choices)))])
    K = float(rng.uniform(*config.k_range))
    params = BokehParams(FocalSpec(d_f), K=K, N=config.layer_count)
    return SceneRecipe(
        background=str(bg),
        background_plane=bg_plane,
        foregrounds=tuple(specs),
        params=params,
        seed=int(seed),
        width=w,
        height=h,
    )


def _resize_premultiplied(rgba: np.ndarray, width: int, height: int) -> np.ndarray:
    interp = cv2.INTER_AREA
    if width > rgba.shape[1] or height > rgba.shape[0]:
        interp = cv2.INTER_LINEAR
    out = cv2.resize(rgba, (width, height), interpolation=interp)
    return np.clip(out, 0.0, 1.0)


def _place_sprite(canvas_shape, sprite: np.ndarray, cx: float, cy: float, scale: float) -> np.ndarray:
    """Paste a scaled sprite centered at (cx, cy) into a transparent canvas."""
    h, w = canvas_shape
    sh, sw = sprite.shape[:2]
    tw = max(2, int(round(sw * scale)))
    th = max(2, int(round(sh * scale)))
    scaled = _resize_premultiplied(sprite, tw, th)
    x0 = int(round(cx - tw / 2.0))
    y0 = int(round(cy - th / 2.0))
    canvas = np.zeros((h, w, 4), dtype=np.float32)
    sx0, sy0 = max(0, -x0), max(0, -y0)
    dx0, dy0 = max(0, x0), max(0, y0)
    cw = min(w - dx0, tw - sx0)
    ch = min(h - dy0, th - sy0)
    if cw > 0 and ch > 0:
        canvas[dy0 : dy0 + ch, dx0 : dx0 + cw] = scaled[sy0 : sy0 + ch, sx0 : sx0 + cw]
    return canvas


def _scene_at_frame(recipe: SceneRecipe, sprites: list, background: np.ndarray, t: int) -> PlanarScene:
    layers = []
    for spec, sprite in zip(recipe.foregrounds, sprites):
        x, y, z = spec.trajectory.at(t)
        scale = z * spec.base_width / sprite.shape[1]
        rgba = _place_sprite((recipe.height, recipe.width), sprite, x, y, scale)
        a, b, c = spec.plane
        layers.append(PlanarLayer(rgba, (a, b, c / z)))
    layers.append(PlanarLayer(background, recipe.background_plane))
    return PlanarScene(tuple(layers), recipe.width, recipe.height)


def _front_disparity(scene: PlanarScene) -> DisparityMap:
    """Plane disparity of the front-most layer with alpha > 0.5 per pixel."""
    h, w = scene.height, scene.width
    out = np.zeros((h, w), dtype=np.float64)
    assigned = np.zeros((h, w), dtype=bool)
    for layer in scene.layers:
        covered = (layer.rgba[:, :, 3] > 0.5) & ~assigned
        if covered.any():
            grid = layer.disparity_grid(h, w)
            out[covered] = grid[covered]
            assigned |= covered
    # fully transparent stack never happens (opaque background), but keep safe
    out[~assigned] = scene.layers[-1].disparity_grid(h, w)[~assigned]
    return DisparityMap(out.astype(np.float32))


def synthesize_pair(recipe: SceneRecipe, samples_per_pixel: int = 128):
    """Render (aif, bokeh, disparity, meta) for one recipe."""
    sprites = [load_rgba(spec.asset) for spec in recipe.foregrounds]
    background = _resize_premultiplied(load_rgba(recipe.background), recipe.width, recipe.height)
    if not np.all(background[:, :, 3] == 1.0):
        raise DataError(f"{recipe.background}: background asset must be fully opaque")

    focal = recipe.params.focal
    pinhole = LensConfig(K=0.0, samples_per_pixel=1, seed=0)
    lens = LensConfig(
        K=recipe.params.K,
        samples_per_pixel=samples_per_pixel,
        seed=derive_seed(recipe.seed, 1),
    )
    aif, bokeh, disparity = [], [], []
    for t in range(recipe.frames):
        scene = _scene_at_frame(recipe, sprites, background, t)
        aif.append(render_reference(scene, focal, pinhole, frame_index=t))
        bokeh.append(render_reference(scene, focal, lens, frame_index=t))
        disparity.append(_front_disparity(scene))
    meta = {
        "d_f": focal.d_f,
        "K": recipe.params.K,
        "seed": recipe.seed,
        "frames": recipe.frames,
        "width": recipe.width,
        "height": recipe.height,
        "trajectories": "|".join(
            "{:.4f},{:.4f},{:.4f}->{:.4f},{:.4f},{:.4f}".format(*s.trajectory.start, *s.trajectory.end)
            for s in recipe.foregrounds
        ),
    }
    return VideoClip(tuple(aif)), VideoClip(tuple(bokeh)), disparity, meta


def _write_video(recipe: SceneRecipe, directory: Path, samples_per_pixel: int) -> dict:
    aif, bokeh, disparity, meta = synthesize_pair(recipe, samples_per_pixel)
    directory.mkdir(parents=True, exist_ok=True)
    save_frame_sequence(aif, directory / "aif")
    save_frame_sequence(bokeh, directory / "bokeh")
    save_disparity_sequence(disparity, directory / "disparity", fmt="pfm")
    with open(directory / "meta.txt", "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")
    return meta


def generate_testset(
    count: int,
    assets: AssetCatalog,
    master_seed: int,
    out_dir,
    config: GeneratorConfig = GeneratorConfig(),
) -> Path:
    """Render ``count`` scenes and write a manifest; returns its path.

    Per-video seeds are counter-derived from the master seed, so videos
    can render on any number of workers without changing a byte.
    """
    if count < 1:
        raise DataError("count must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recipes = [sample_recipe(assets, derive_seed(master_seed, i), config) for i in range(count)]
    names = [f"video_{i:03d}" for i in range(count)]

    def job(i: int) -> dict:
        return _write_video(recipes[i], out / names[i], config.samples_per_pixel)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            metas = list(pool.map(job, range(count)))
    else:
        metas = [job(i) for i in range(count)]

    manifest = out / MANIFEST_NAME
    with open(manifest, "w") as fh:
        fh.write("\t".join(MANIFEST_COLUMNS) + "\n")
        for i, meta in enumerate(metas):
            fh.write(
                f"{i}\t{names[i]}\t{meta['d_f']:.6f}\t{meta['K']:.6f}\t{meta['frames']}\t{meta['seed']}\n"
            )
    return manifest


def write_demo_assets(directory, seed: int = 0, n_backgrounds: int = 2, n_foregrounds: int = 3) -> AssetCatalog:
    """Generate a small procedural asset catalog (for demos and tests)."""
    root = Path(directory)
    rng = np.random.default_rng(seed)
    (root / "backgrounds").mkdir(parents=True, exist_ok=True)
    (root / "foregrounds").mkdir(parents=True, exist_ok=True)
    for i in range(n_backgrounds):
        tex = _smooth_noise(rng, 288, 512)
        cv2.imwrite(str(root / "backgrounds" / f"bg_{i:02d}.png"), _to_png(tex))
    for i in range(n_foregrounds):
        tex = _smooth_noise(rng, 160, 160, lo=0.2, hi=0.95)
        yy, xx = np.mgrid[0:160, 0:160]
        r = 64 + 12 * np.sin(np.arctan2(yy - 80, xx - 80) * (3 + i))
        alpha = (np.hypot(yy - 80, xx - 80) <= r).astype(np.float32)
        rgba = np.concatenate([_to_png(tex), (alpha[..., None] * 255).astype(np.uint8)], axis=2)
        cv2.imwrite(str(root / "foregrounds" / f"fg_{i:02d}.png"), rgba)
    return AssetCatalog.scan(root)


def _smooth_noise(rng, h: int, w: int, lo: float = 0.1, hi: float = 0.9) -> np.ndarray:
    coarse = rng.random((h // 16 + 2, w // 16 + 2, 3))
    img = cv2.resize(coarse, (w, h), interpolation=cv2.INTER_CUBIC)
    img = (img - img.min()) / max(np.ptp(img), 1e-9)
    return (lo + (hi - lo) * img).astype(np.float32)


def _to_png(linear_rgb: np.ndarray) -> np.ndarray:
    from .core_model import linear_to_srgb

    srgb = linear_to_srgb(np.clip(linear_rgb, 0.0, 1.0))
    return np.rint(srgb[:, :, ::-1] * 255.0).astype(np.uint8)
