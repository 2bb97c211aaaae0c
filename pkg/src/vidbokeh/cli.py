"""Command line front end: render, dataset, eval, perturb, serve.

Exit codes: 0 success, 1 usage error, 2 data error.  Every command
prints the paths it wrote so runs can be chained in scripts.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .core_model import (
    BokehParams,
    DataError,
    FocalSpec,
    VideoClip,
    load_frame_sequence,
    save_disparity_sequence,
    save_frame_sequence,
)
from .optics import disparity_difference_map

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DEFAULT_SEGMENT_LEN = 8
DEFAULT_OVERLAP = 4


class UsageError(Exception):
    """Flag combinations argparse cannot reject on its own."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; keep 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vidbokeh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    render = sub.add_parser("render", help="render bokeh for a frame sequence")
    render.add_argument("--input", required=True, help="directory of frame_%%05d.png")
    render.add_argument("--disparity", required=True, help="directory of disparity frames (.pfm or 16-bit .png)")
    render.add_argument("--out", required=True, help="output directory")
    render.add_argument("--focus-disparity", type=float, default=None, help="focal-plane disparity d_f")
    render.add_argument("--focus-px", default=None, metavar="X,Y,T", help="pick d_f from the disparity at pixel (x, y) of frame t")
    render.add_argument("--strength", type=float, default=8.0, help="blur strength K (px per unit disparity difference)")
    render.add_argument("--layers", type=int, default=8, help="layer count N")
    render.add_argument("--segment-len", type=int, default=DEFAULT_SEGMENT_LEN, help="temporal segment length")
    render.add_argument("--overlap", type=int, default=DEFAULT_OVERLAP, help="temporal segment overlap")
    render.add_argument("--blend", choices=("cosine", "linear"), default="cosine", help="overlap blend weighting")
    render.add_argument("--renderer", choices=("mpi", "raytrace"), default="mpi")
    render.add_argument("--spp", type=int, default=64, help="lens samples per pixel (raytrace renderer)")
    render.add_argument("--seed", type=int, default=0, help="lens sampling seed (raytrace renderer)")
    render.add_argument("--threads", type=int, default=4, help="worker threads")
    render.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)

    dataset = sub.add_parser("dataset", help="generate a paired synthetic test set")
    dataset.add_argument("--assets", required=True, help="catalog root with backgrounds/ and foregrounds/")
    dataset.add_argument("--count", type=int, required=True, help="number of videos")
    dataset.add_argument("--seed", type=int, required=True, help="master seed")
    dataset.add_argument("--out", required=True, help="output directory")
    dataset.add_argument("--width", type=int, default=1024)
    dataset.add_argument("--height", type=int, default=576)
    dataset.add_argument("--frames", type=int, default=25)
    dataset.add_argument("--spp", type=int, default=128, help="lens samples per pixel for the bokeh stream")
    dataset.add_argument("--workers", type=int, default=1, help="videos rendered in parallel")
    dataset.add_argument("--demo-assets", action="store_true", help="write a procedural catalog into --assets first")

    evaluate = sub.add_parser("eval", help="score rendered clips against ground truth")
    evaluate.add_argument("--pred", required=True, help="rendered clip directory (or root of clip directories)")
    evaluate.add_argument("--gt", required=True, help="ground-truth directory with matching layout")
    evaluate.add_argument("--out", required=True, help="report directory")
    evaluate.add_argument("--metrics", default="rm,ssim,psnr", help="comma list from: psnr,ssim,rm,vepi,texture_loss")
    evaluate.add_argument("--roi", default=None, help="ROI mask directory (required for vepi)")
    evaluate.add_argument("--rm-mode", choices=("paired", "solo"), default="paired")
    evaluate.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    perturb = sub.add_parser("perturb", help="corrupt a disparity sequence")
    perturb.add_argument("--disparity", required=True, help="directory of disparity frames")
    perturb.add_argument("--out", default=None, help="output directory (default: input + .perturbed)")
    perturb.add_argument("--seed", type=int, default=0)
    perturb.add_argument("--preset", default=None, help="named preset, e.g. stage2-default")
    perturb.add_argument("--probability", type=float, default=None, help="override the preset's per-clip probability")
    perturb.add_argument("--elastic-alpha", type=float, default=0.0)
    perturb.add_argument("--elastic-sigma", type=float, default=4.0)
    perturb.add_argument("--perlin-amp", type=float, default=0.0, help="absolute noise amplitude in disparity units")
    perturb.add_argument("--perlin-scale", type=float, default=32.0)
    perturb.add_argument("--morph-op", choices=("dilate", "erode", "open", "close"), default=None)
    perturb.add_argument("--morph-radius", type=int, default=2)
    perturb.add_argument("--format", choices=("pfm", "png16"), default="pfm")

    serve = sub.add_parser("serve", help="run the HTTP render service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--threads", type=int, default=2, help="render worker threads")
    serve.add_argument("--cache-frames", type=int, default=64, help="decoded frames kept in memory")
    serve.add_argument("--queue-limit", type=int, default=8, help="maximum queued render jobs")
    return parser


def _parse_focus_px(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--focus-px expects X,Y,T, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--focus-px expects integers, got {text!r}")


def _resolve_focus(args, disparities) -> float:
    if args.focus_disparity is not None and args.focus_px is not None:
        raise UsageError("--focus-px and --focus-disparity are mutually exclusive")
    if args.focus_disparity is not None:
        if args.focus_disparity <= 0:
            raise DataError("--focus-disparity must be > 0")
        return float(args.focus_disparity)
    if args.focus_px is not None:
        x, y, t = _parse_focus_px(args.focus_px)
        if not 0 <= t < len(disparities):
            raise DataError(f"--focus-px frame {t} outside clip of {len(disparities)} frames")
        d = disparities[t]
        if not (0 <= x < d.width and 0 <= y < d.height):
            raise DataError(f"--focus-px ({x}, {y}) outside {d.width}x{d.height}")
        return float(d.values[y, x])
    raise UsageError("one of --focus-px or --focus-disparity is required")


def cmd_render(args) -> int:
    from . import render_mpi, render_raytrace, temporal_blend

    clip = load_frame_sequence(args.input, kind="rgb")
    disparities = load_frame_sequence(args.disparity, kind="disparity")
    if len(disparities) != len(clip):
        raise DataError(
            f"{len(clip)} frames but {len(disparities)} disparity maps"
        )
    d_f = _resolve_focus(args, disparities)
    params = BokehParams(FocalSpec(d_f), K=args.strength, N=args.layers)
    _, norm_ref = disparity_difference_map(disparities, params.focal)

    if args.renderer == "mpi":
        def render_one(frame, t):
            return render_mpi.render_bokeh_frame(
                frame, disparities[t], params, norm_ref, threads=args.threads
            )
    else:
        lens = render_raytrace.LensConfig(
            K=args.strength, samples_per_pixel=args.spp, seed=args.seed
        )

        def render_one(frame, t):
            return render_raytrace.render_gather_frame(
                frame, disparities[t], params.focal, lens, frame_index=t
            )

    def process(subclip, start):
        return [render_one(f, start + i) for i, f in enumerate(subclip.frames)]

    t0 = time.perf_counter()
    if len(clip) > 1:
        result = temporal_blend.process_in_segments(
            clip, process, segment_len=args.segment_len, overlap=args.overlap, mode=args.blend
        )
    else:
        result = VideoClip(tuple(process(clip, 0)), frame_rate=clip.frame_rate)
    elapsed = time.perf_counter() - t0

    save_frame_sequence(result, args.out, bit_depth=args.bit_depth)
    print(f"rendered {len(clip)} frames in {elapsed:.2f} s ({elapsed / len(clip):.3f} s/frame, d_f={d_f:.4f})")
    print(args.out)
    return EXIT_OK


def cmd_dataset(args) -> int:
    from .dataset_gen import AssetCatalog, GeneratorConfig, generate_testset, write_demo_assets

    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if args.demo_assets:
        write_demo_assets(args.assets, seed=args.seed)
    catalog = AssetCatalog.scan(args.assets)
    config = GeneratorConfig(
        width=args.width,
        height=args.height,
        frames=args.frames,
        samples_per_pixel=args.spp,
        workers=args.workers,
    )
    manifest = generate_testset(args.count, catalog, args.seed, args.out, config)
    print(manifest)
    return EXIT_OK


def _find_clip_dirs(root: Path) -> dict:
    """Map relative path -> directory for every PNG frame sequence under root."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    found = {}
    if any(root.glob("frame_*.png")):
        found[""] = root
    for sub in sorted(p for p in root.rglob("*") if p.is_dir()):
        if any(sub.glob("frame_*.png")):
            found[str(sub.relative_to(root))] = sub
    if not found:
        raise DataError(f"{root}: no frame_*.png sequences found")
    return found


def _load_rois(directory: Path, count: int):
    import cv2

    from .metrics import RoiMask

    files = sorted(Path(directory).glob("frame_*.png"))
    if len(files) != count:
        raise DataError(f"{directory}: {len(files)} ROI masks for {count} frames")
    rois = []
    for p in files:
        raw = cv2.imread(str(p), cv2.IMREAD_GRAYSCALE)
        if raw is None:
            raise DataError(f"{p}: cannot read ROI mask")
        rois.append(RoiMask(raw > 0))
    return rois


def cmd_eval(args) -> int:
    from . import metrics as metrics_mod
    from .reporting import render_report_figures, write_table

    requested = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(requested) - set(metrics_mod.METRIC_NAMES)
    if unknown:
        raise UsageError(f"unknown metrics: {sorted(unknown)}")
    if "vepi" in requested and args.roi is None:
        raise UsageError("--metrics vepi requires --roi")

    pred_dirs = _find_clip_dirs(Path(args.pred))
    gt_dirs = _find_clip_dirs(Path(args.gt))
    common = sorted(set(pred_dirs) & set(gt_dirs))
    if not common:
        raise DataError("no matching clip directories between --pred and --gt")

    rows = []
    per_frame = {m: {} for m in ("psnr", "ssim") if m in requested}
    for rel in common:
        pred = load_frame_sequence(pred_dirs[rel], kind="rgb")
        gt = load_frame_sequence(gt_dirs[rel], kind="rgb")
        rois = None
        if "vepi" in requested:
            roi_dir = Path(args.roi) / rel if rel else Path(args.roi)
            rois = _load_rois(roi_dir, len(pred))
        report = metrics_mod.evaluate_clip_pair(
            pred, gt, rois=rois, metrics=requested, rm_mode=args.rm_mode
        )
        clip_id = rel or "clip"
        rows.append((clip_id, report.as_dict()))
        for m in per_frame:
            fn = metrics_mod.psnr if m == "psnr" else metrics_mod.ssim
            per_frame[m][clip_id] = [fn(p, g) for p, g in zip(pred.frames, gt.frames)]

    out = Path(args.out)
    table = write_table(out / "report.tsv", rows, requested)
    print(table)
    if not args.no_figures:
        for fig in render_report_figures(out, rows, requested, per_frame):
            print(fig)
    return EXIT_OK


def cmd_perturb(args) -> int:
    from . import perturb as perturb_mod
    from .sampling import derive_seed

    explicit = (
        args.elastic_alpha > 0 or args.perlin_amp > 0 or args.morph_op is not None
    )
    if args.preset is not None and explicit:
        raise UsageError("--preset and explicit op flags are mutually exclusive")

    maps = load_frame_sequence(args.disparity, kind="disparity")
    if args.preset is not None:
        out_maps = perturb_mod.apply_preset(
            maps, args.seed, preset=args.preset, probability=args.probability
        )
    else:
        out_maps = []
        for d in maps:
            m = d
            if args.elastic_alpha > 0:
                m = perturb_mod.elastic_transform(
                    m, args.elastic_alpha, args.elastic_sigma, derive_seed(args.seed, 0)
                )
            if args.perlin_amp > 0:
                m = perturb_mod.perlin_noise_add(
                    m, args.perlin_amp, args.perlin_scale, derive_seed(args.seed, 1)
                )
            if args.morph_op is not None:
                m = perturb_mod.morphological(m, args.morph_op, args.morph_radius)
            out_maps.append(m)

    src = Path(args.disparity)
    out = Path(args.out) if args.out else src.with_name(src.name + ".perturbed")
    save_disparity_sequence(out_maps, out, fmt=args.format)
    print(out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    app = create_app(
        ServiceConfig(
            cache_frames=args.cache_frames,
            queue_limit=args.queue_limit,
            workers=args.threads,
        )
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


_COMMANDS = {
    "render": cmd_render,
    "dataset": cmd_dataset,
    "eval": cmd_eval,
    "perturb": cmd_perturb,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vidbokeh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"vidbokeh: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"vidbokeh: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
