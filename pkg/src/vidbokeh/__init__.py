"""Controllable video bokeh engine.

Layered depth-of-field rendering driven by per-pixel disparity, with a
thin-lens Monte Carlo reference renderer, synthetic paired-data generation,
disparity perturbations, overlap-blended segment inference, and classical
video quality metrics.  Exposed as a library, a CLI (``vidbokeh``), and an
HTTP preview service (``vidbokeh.service``).
"""

from vidbokeh.core_model import (
    BokehParams,
    DataError,
    DisparityMap,
    FocalSpec,
    Frame,
    VideoClip,
    load_frame_sequence,
    save_disparity_sequence,
    save_frame_sequence,
)
from vidbokeh.dataset_gen import (
    AssetCatalog,
    GeneratorConfig,
    SceneRecipe,
    generate_testset,
    sample_recipe,
    synthesize_pair,
    write_demo_assets,
)
from vidbokeh.gated_attention import (
    AttentionMask,
    GateParams,
    attention_weights,
    fourier_embed,
    layer_token_mask,
    mpi_attention,
)
from vidbokeh.metrics import (
    MetricReport,
    RoiMask,
    evaluate_clip_pair,
    psnr,
    rm,
    rm_solo,
    ssim,
    texture_loss,
    vepi,
)
from vidbokeh.optics import (
    MpiMask,
    VDMap,
    build_mpi_mask,
    coc_radius,
    disparity_difference_map,
    exclusive_bands,
    layer_thresholds,
)
from vidbokeh.perturb import PerturbationPreset, apply_preset, perturb_map
from vidbokeh.render_mpi import render_bokeh_clip, render_bokeh_frame
from vidbokeh.render_raytrace import (
    LensConfig,
    PlanarLayer,
    PlanarScene,
    render_gather_frame,
    render_reference,
    render_reference_clip,
)
from vidbokeh.temporal_blend import (
    SegmentPlan,
    blend_weight,
    merge_segments,
    plan_segments,
    process_in_segments,
)

__version__ = "0.1.0"

__all__ = [
    # core data model and I/O
    "Frame",
    "VideoClip",
    "DisparityMap",
    "FocalSpec",
    "BokehParams",
    "DataError",
    "load_frame_sequence",
    "save_frame_sequence",
    "save_disparity_sequence",
    # focal-plane geometry and layer masks
    "VDMap",
    "MpiMask",
    "coc_radius",
    "layer_thresholds",
    "disparity_difference_map",
    "build_mpi_mask",
    "exclusive_bands",
    # renderers
    "render_bokeh_frame",
    "render_bokeh_clip",
    "LensConfig",
    "PlanarLayer",
    "PlanarScene",
    "render_reference",
    "render_reference_clip",
    "render_gather_frame",
    # temporal segment blending
    "SegmentPlan",
    "plan_segments",
    "blend_weight",
    "merge_segments",
    "process_in_segments",
    # dataset synthesis
    "AssetCatalog",
    "GeneratorConfig",
    "SceneRecipe",
    "sample_recipe",
    "synthesize_pair",
    "generate_testset",
    "write_demo_assets",
    # disparity perturbations
    "PerturbationPreset",
    "perturb_map",
    "apply_preset",
    # metrics
    "MetricReport",
    "RoiMask",
    "psnr",
    "ssim",
    "rm",
    "rm_solo",
    "vepi",
    "texture_loss",
    "evaluate_clip_pair",
    # numeric attention reference
    "GateParams",
    "AttentionMask",
    "fourier_embed",
    "mpi_attention",
    "attention_weights",
    "layer_token_mask",
    "__version__",
]
