"""HTTP facade over the renderer for interactive refocusing.

Clients register frame/disparity directories that live on the server,
then drive two render paths:

  * previews: single frame at preview_scale <= 0.5 render synchronously
    on the request thread and stream back as PNG, so the click-adjust
    loop stays sub-second;
  * clips: multi-frame requests become queued jobs on a small worker
    pool, polled for progress and fetched frame by frame.

Blur strength is defined at native resolution: previews scale K by
preview_scale so the downscaled image keeps the same visual blur.
Decoded frames sit in a bounded LRU cache; the job queue is bounded and
answers 409 when full.  All rendering is deterministic, so identical
requests produce byte-identical PNGs.
"""

from __future__ import annotations

import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import cv2
import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from .core_model import (
    DataError,
    DisparityMap,
    FocalSpec,
    Frame,
    BokehParams,
    linear_to_srgb,
    read_meta,
    read_pfm,
)
from .optics import build_mpi_mask, disparity_difference_map
from .render_mpi import render_bokeh_frame
from .render_raytrace import LensConfig, render_gather_frame


@dataclass(frozen=True)
class ServiceConfig:
    cache_frames: int = 64
    queue_limit: int = 8
    workers: int = 2
    max_layers: int = 64


@dataclass
class ClipSession:
    clip_id: str
    rgb_files: tuple
    disparity_files: tuple
    disparity_scale: float
    width: int
    height: int
    frame_rate: float
    d_min: float
    d_max: float

    @property
    def frames(self) -> int:
        return len(self.rgb_files)

    def norm_ref(self, d_f: float) -> float:
        return max(self.d_max - d_f, d_f - self.d_min, 0.0)


@dataclass
class RenderJob:
    job_id: str
    clip_id: str
    frame_range: tuple
    state: str = "queued"
    progress: int = 0
    error: Optional[str] = None
    results: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.frame_range[1] - self.frame_range[0]


class _FrameCache:
    """Bounded LRU of decoded frames keyed by (clip_id, kind, index)."""

    def __init__(self, capacity: int):
        self._capacity = max(1, capacity)
        self._items: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get_or_load(self, key, loader):
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                return self._items[key]
        value = loader()
        with self._lock:
            self._items[key] = value
            self._items.move_to_end(key)
            while len(self._items) > self._capacity:
                self._items.popitem(last=False)
        return value

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class RegisterBody(BaseModel):
    rgb_dir: str
    disparity_dir: str


class FocusPx(BaseModel):
    x: int
    y: int
    t: int


class RenderBody(BaseModel):
    K: float
    N: int = 8
    focus_disparity: Optional[float] = None
    focus_px: Optional[FocusPx] = None
    frames: Union[int, List[int], None] = None  # t, or [start, end); default whole clip
    renderer: str = "mpi"
    preview_scale: float = 1.0
    spp: int = 64
    seed: int = 0


def _decode_rgb_file(path: Path) -> Frame:
    from .core_model import _decode_rgb

    return _decode_rgb(path)


def _decode_disparity_file(path: Path, scale: float) -> DisparityMap:
    if path.suffix.lower() == ".pfm":
        return DisparityMap(read_pfm(path))
    from .core_model import _decode_disparity

    d = _decode_disparity(path)
    if scale != 1.0:
        d = DisparityMap(d.values * np.float32(scale))
    return d


def _encode_png(img: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", img)
    if not ok:
        raise HTTPException(500, "PNG encoding failed")
    return bytes(buf)


def _frame_png(frame: Frame) -> bytes:
    srgb = linear_to_srgb(frame.pixels.astype(np.float64))
    coded = np.clip(np.rint(srgb * 255.0), 0, 255).astype(np.uint8)
    return _encode_png(coded[:, :, ::-1])


def _gray_png(values: np.ndarray) -> bytes:
    coded = np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8)
    return _encode_png(coded)


def create_app(config: ServiceConfig = ServiceConfig()) -> FastAPI:
    app = FastAPI(title="vidbokeh render service")
    # the browser frontend runs on its own origin and reads the focus header
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Focus-Disparity"],
    )
    sessions: dict = {}
    jobs: dict = {}
    registry_lock = threading.Lock()
    cache = _FrameCache(config.cache_frames)
    pool = None  # lazy so TestClient teardown stays clean

    def worker_pool():
        nonlocal pool
        if pool is None:
            from concurrent.futures import ThreadPoolExecutor

            pool = ThreadPoolExecutor(max_workers=config.workers)
        return pool

    app.state.frame_cache = cache
    app.state.config = config

    def get_session(clip_id: str) -> ClipSession:
        with registry_lock:
            session = sessions.get(clip_id)
        if session is None:
            raise HTTPException(404, f"unknown clip {clip_id}")
        return session

    def load_rgb(session: ClipSession, t: int) -> Frame:
        return cache.get_or_load(
            (session.clip_id, "rgb", t),
            lambda: _decode_rgb_file(session.rgb_files[t]),
        )

    def load_disparity(session: ClipSession, t: int) -> DisparityMap:
        return cache.get_or_load(
            (session.clip_id, "disparity", t),
            lambda: _decode_disparity_file(session.disparity_files[t], session.disparity_scale),
        )

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.post("/clips")
    def register_clip(body: RegisterBody):
        rgb_dir = Path(body.rgb_dir)
        disp_dir = Path(body.disparity_dir)
        try:
            rgb_files = tuple(sorted(rgb_dir.glob("frame_*.png")))
            disp_files = tuple(
                sorted(list(disp_dir.glob("frame_*.pfm")) + list(disp_dir.glob("frame_*.png")))
            )
            if not rgb_files:
                raise DataError(f"{rgb_dir}: no frame_*.png found")
            if len(disp_files) != len(rgb_files):
                raise DataError(
                    f"{len(rgb_files)} rgb frames but {len(disp_files)} disparity maps"
                )
            meta = read_meta(rgb_dir)
            disp_meta = read_meta(disp_dir)
            first = _decode_rgb_file(rgb_files[0])
            d_min, d_max = np.inf, -np.inf
            for p in disp_files:
                d = _decode_disparity_file(p, disp_meta.disparity_scale)
                if (d.height, d.width) != (first.height, first.width):
                    raise DataError(f"{p}: disparity dimensions differ from rgb")
                d_min = min(d_min, float(d.values.min()))
                d_max = max(d_max, float(d.values.max()))
        except DataError as exc:
            raise HTTPException(400, str(exc))
        session = ClipSession(
            clip_id=uuid.uuid4().hex[:12],
            rgb_files=rgb_files,
            disparity_files=disp_files,
            disparity_scale=disp_meta.disparity_scale,
            width=first.width,
            height=first.height,
            frame_rate=meta.frame_rate,
            d_min=d_min,
            d_max=d_max,
        )
        with registry_lock:
            sessions[session.clip_id] = session
        return {
            "clip_id": session.clip_id,
            "frames": session.frames,
            "width": session.width,
            "height": session.height,
            "frame_rate": session.frame_rate,
            "disparity_min": session.d_min,
            "disparity_max": session.d_max,
        }

    @app.get("/clips/{clip_id}/frame/{t}")
    def get_frame(
        clip_id: str,
        t: int,
        kind: str = Query("rgb"),
        layer: Optional[int] = Query(None),
        focus: Optional[float] = Query(None),
        layers: Optional[int] = Query(None),
    ):
        session = get_session(clip_id)
        if not 0 <= t < session.frames:
            raise HTTPException(404, f"frame {t} outside [0, {session.frames})")
        if kind == "rgb":
            png = _frame_png(load_rgb(session, t))
        elif kind == "disparity":
            d = load_disparity(session, t).values.astype(np.float64)
            span = session.d_max - session.d_min
            norm = (d - session.d_min) / span if span > 0 else np.zeros_like(d)
            png = _gray_png(norm)
        elif kind == "vd":
            if focus is None or focus <= 0:
                raise HTTPException(400, "kind=vd requires focus > 0")
            d = load_disparity(session, t).values.astype(np.float64)
            norm_ref = session.norm_ref(focus)
            vd = np.abs(d - focus) / norm_ref if norm_ref > 0 else np.zeros_like(d)
            png = _gray_png(np.clip(vd, 0.0, 1.0))
        elif kind == "mask":
            if focus is None or focus <= 0 or layer is None or layers is None:
                raise HTTPException(400, "kind=mask requires focus, layer and layers")
            if not 2 <= layers <= app.state.config.max_layers:
                raise HTTPException(400, f"layers must be in [2, {app.state.config.max_layers}]")
            if not 1 <= layer <= layers:
                raise HTTPException(400, f"layer must be in [1, {layers}]")
            d = load_disparity(session, t)
            try:
                mask = build_mpi_mask(d, FocalSpec(focus), layers, session.norm_ref(focus))
            except DataError as exc:
                raise HTTPException(400, str(exc))
            png = _encode_png(mask.layers[layer - 1].astype(np.uint8) * 255)
        else:
            raise HTTPException(400, f"unknown kind {kind!r}")
        return Response(content=png, media_type="image/png")

    def resolve_focus(session: ClipSession, body: RenderBody) -> float:
        if (body.focus_disparity is None) == (body.focus_px is None):
            raise HTTPException(400, "exactly one of focus_disparity / focus_px is required")
        if body.focus_disparity is not None:
            if body.focus_disparity <= 0:
                raise HTTPException(400, "focus_disparity must be > 0")
            return float(body.focus_disparity)
        px = body.focus_px
        if not 0 <= px.t < session.frames:
            raise HTTPException(400, f"focus_px frame {px.t} outside clip")
        d = load_disparity(session, px.t)
        if not (0 <= px.x < d.width and 0 <= px.y < d.height):
            raise HTTPException(400, f"focus_px ({px.x}, {px.y}) outside {d.width}x{d.height}")
        return float(d.values[px.y, px.x])

    def render_frame_bytes(session: ClipSession, body: RenderBody, d_f: float, t: int) -> bytes:
        frame = load_rgb(session, t)
        disparity = load_disparity(session, t)
        scale = body.preview_scale
        K = body.K
        if scale < 1.0:
            w = max(8, int(round(session.width * scale)))
            h = max(8, int(round(session.height * scale)))
            frame = Frame(
                np.clip(cv2.resize(frame.pixels, (w, h), interpolation=cv2.INTER_AREA), 0, 1)
            )
            disparity = DisparityMap(
                cv2.resize(disparity.values, (w, h), interpolation=cv2.INTER_AREA)
            )
            K = body.K * scale
        if K == 0:
            return _frame_png(frame)
        norm_ref = session.norm_ref(d_f)
        focal = FocalSpec(d_f)
        if body.renderer == "mpi":
            params = BokehParams(focal, K=K, N=body.N)
            out = render_bokeh_frame(frame, disparity, params, norm_ref)
        else:
            lens = LensConfig(K=K, samples_per_pixel=body.spp, seed=body.seed)
            out = render_gather_frame(frame, disparity, focal, lens, frame_index=t)
        return _frame_png(out)

    @app.post("/clips/{clip_id}/render")
    def render_clip(clip_id: str, body: RenderBody):
        session = get_session(clip_id)
        if body.renderer not in ("mpi", "raytrace"):
            raise HTTPException(400, f"unknown renderer {body.renderer!r}")
        if not 0 < body.preview_scale <= 1.0:
            raise HTTPException(400, "preview_scale must be in (0, 1]")
        if body.K < 0:
            raise HTTPException(400, "K must be >= 0")
        if not 2 <= body.N <= app.state.config.max_layers:
            raise HTTPException(400, f"N must be in [2, {app.state.config.max_layers}]")
        if body.frames is None:
            start, end = 0, session.frames
        elif isinstance(body.frames, int):
            start, end = body.frames, body.frames + 1
        elif isinstance(body.frames, list) and len(body.frames) == 2:
            start, end = int(body.frames[0]), int(body.frames[1])
        else:
            raise HTTPException(400, "frames must be an int or a [start, end) pair")
        if not (0 <= start < end <= session.frames):
            raise HTTPException(400, f"frame range [{start}, {end}) outside clip")
        d_f = resolve_focus(session, body)

        if end - start == 1 and body.preview_scale <= 0.5:
            try:
                png = render_frame_bytes(session, body, d_f, start)
            except DataError as exc:
                raise HTTPException(400, str(exc))
            return Response(
                content=png, media_type="image/png", headers={"X-Focus-Disparity": f"{d_f:.6f}"}
            )

        with registry_lock:
            active = sum(1 for j in jobs.values() if j.state in ("queued", "running"))
            if active >= config.queue_limit:
                raise HTTPException(409, "render queue full, retry later")
            job = RenderJob(
                job_id=uuid.uuid4().hex[:12], clip_id=clip_id, frame_range=(start, end)
            )
            jobs[job.job_id] = job

        def run() -> None:
            with registry_lock:
                job.state = "running"
            try:
                for t in range(start, end):
                    png = render_frame_bytes(session, body, d_f, t)
                    with registry_lock:
                        job.results[t] = png
                        job.progress += 1
                with registry_lock:
                    job.state = "done"
            except Exception as exc:  # surface any render failure to the poller
                with registry_lock:
                    job.state = "failed"
                    job.error = str(exc)

        worker_pool().submit(run)
        return {"job_id": job.job_id, "frames": [start, end], "focus_disparity": d_f}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        with registry_lock:
            job = jobs.get(job_id)
            if job is None:
                raise HTTPException(404, f"unknown job {job_id}")
            return {
                "job_id": job.job_id,
                "clip_id": job.clip_id,
                "state": job.state,
                "progress": job.progress,
                "total": job.total,
                "frames": list(job.frame_range),
                "error": job.error,
            }

    @app.get("/jobs/{job_id}/result/{t}")
    def job_result(job_id: str, t: int):
        with registry_lock:
            job = jobs.get(job_id)
            if job is None:
                raise HTTPException(404, f"unknown job {job_id}")
            start, end = job.frame_range
            if not start <= t < end:
                raise HTTPException(404, f"frame {t} outside job range [{start}, {end})")
            if job.state == "failed":
                raise HTTPException(500, job.error or "render failed")
            png = job.results.get(t)
        if png is None:
            raise HTTPException(425, f"frame {t} not rendered yet")
        return Response(content=png, media_type="image/png")

    return app
