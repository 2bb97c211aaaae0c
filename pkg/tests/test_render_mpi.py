"""Layered disk-blur renderer: kernels, compositing, oracle agreement."""

import numpy as np
import pytest
from scipy import ndimage

import oracles
from conftest import build_two_plane, smooth_texture
from vidbokeh.core_model import BokehParams, DataError, DisparityMap, FocalSpec, Frame, VideoClip
from vidbokeh.metrics import psnr
from vidbokeh.render_mpi import disk_kernel, fill_nearest_valid, render_bokeh_clip, render_bokeh_frame
from vidbokeh.render_raytrace import LensConfig, render_gather_frame, render_reference


class TestDiskKernel:
    @pytest.mark.parametrize("radius", [0.5, 1.0, 2.7, 5.0, 13.0])
    def test_sums_to_one(self, radius):
        assert float(disk_kernel(radius).sum()) == pytest.approx(1.0, abs=1e-12)

    def test_tiny_radius_is_identity(self):
        assert disk_kernel(0.0).shape == (1, 1)
        assert disk_kernel(5e-4).shape == (1, 1)

    @pytest.mark.parametrize("radius", [1.3, 3.6])
    def test_symmetry(self, radius):
        k = disk_kernel(radius)
        assert np.array_equal(k, k[::-1])
        assert np.array_equal(k, k[:, ::-1])
        assert np.array_equal(k, k.T)

    def test_support_bounded_by_radius(self):
        radius = 2.2
        k = disk_kernel(radius)
        R = k.shape[0] // 2
        ax = np.arange(-R, R + 1)
        dist = np.hypot(ax[None, :], ax[:, None])
        assert np.all(k[dist > radius + 0.5] == 0.0)
        assert np.all(k[dist <= radius - 0.5] > 0.0)

    def test_varies_continuously_with_radius(self):
        a = disk_kernel(2.0)
        b = disk_kernel(2.0 + 1e-5)
        assert a.shape == b.shape
        assert float(np.abs(a - b).max()) < 1e-4

    @pytest.mark.parametrize("radius,tol", [(0.8, 0.15), (1.7, 0.06), (2.5, 0.03), (4.2, 0.03)])
    def test_close_to_true_area_coverage(self, radius, tol):
        # the rim ramp approximates pixel area coverage; the gap shrinks
        # as the radius grows
        k = disk_kernel(radius)
        a = oracles.disk_area_kernel(radius)
        assert k.shape == a.shape
        assert float(np.abs(k - a).sum()) <= tol

    def test_spread_grows_with_radius(self):
        def second_moment(k):
            R = k.shape[0] // 2
            ax = np.arange(-R, R + 1, dtype=np.float64)
            return float((k * (ax[None, :] ** 2 + ax[:, None] ** 2)).sum())

        moments = [second_moment(disk_kernel(r)) for r in (1.0, 2.0, 4.0, 8.0)]
        assert all(m2 > m1 for m1, m2 in zip(moments, moments[1:]))


class TestFillNearestValid:
    def test_fills_from_nearest_neighbor(self):
        color = np.zeros((4, 10, 3), np.float64)
        color[:, :5] = 0.7
        valid = np.zeros((4, 10), bool)
        valid[:, :5] = True
        out = fill_nearest_valid(color, valid)
        assert np.all(out[:, 5:] == 0.7)  # within reach of the fill

    def test_distance_limit_respected(self):
        w = 24
        color = np.zeros((2, w, 3), np.float64)
        color[:, 0] = 1.0
        valid = np.zeros((2, w), bool)
        valid[:, 0] = True
        out = fill_nearest_valid(color, valid, max_distance=8.0)
        assert np.all(out[:, 1:9] == 1.0)
        assert np.all(out[:, 10:] == 0.0)

    def test_noop_when_all_valid(self):
        color = np.random.default_rng(0).random((4, 4, 3))
        assert fill_nearest_valid(color, np.ones((4, 4), bool)) is color


class TestRenderFrame:
    def test_zero_strength_is_identity(self):
        frame = Frame(smooth_texture(1, 24, 24))
        d = DisparityMap(np.full((24, 24), 0.5, np.float32))
        params = BokehParams(FocalSpec(1.0), K=0.0, N=8)
        assert render_bokeh_frame(frame, d, params, 0.5) is frame

    def test_dimension_mismatch_raises(self):
        frame = Frame(smooth_texture(1, 24, 24))
        d = DisparityMap(np.full((24, 25), 0.5, np.float32))
        with pytest.raises(DataError):
            render_bokeh_frame(frame, d, BokehParams(FocalSpec(1.0)), 0.5)

    def test_constant_image_is_preserved(self):
        frame = Frame(np.full((32, 32, 3), 0.6, np.float32))
        rng = np.random.default_rng(2)
        d = DisparityMap(rng.uniform(0.2, 1.4, (32, 32)).astype(np.float32))
        params = BokehParams(FocalSpec(0.8), K=9.0, N=6)
        out = render_bokeh_frame(frame, d, params, 0.6)
        assert float(np.abs(out.pixels - 0.6).max()) < 1e-5

    def test_output_stays_in_range(self):
        case = build_two_plane(3, 48, 48)
        params = BokehParams(FocalSpec(case.d_bg), K=14.0, N=8)
        norm = float(np.abs(case.disparity.values - case.d_bg).max())
        out = render_bokeh_frame(case.frame, case.disparity, params, norm)
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0

    def test_in_focus_half_untouched(self):
        # right half exactly at focus, left half far away: the right
        # interior must pass through unchanged
        h, w = 32, 64
        tex = smooth_texture(8, h, w)
        d = np.full((h, w), 0.75, np.float32)
        d[:, : w // 2] = 0.25
        params = BokehParams(FocalSpec(0.75), K=6.0, N=4)
        out = render_bokeh_frame(Frame(tex), DisparityMap(d), params, 0.5)
        interior = np.zeros((h, w), bool)
        interior[:, w // 2 + 8 :] = True
        assert float(np.abs(out.pixels - tex)[interior].max()) < 1e-6

    def test_blur_removes_variance_monotonically(self):
        tex = smooth_texture(31, 80, 80)
        d = DisparityMap(np.full((80, 80), 0.3, np.float32))
        variances = []
        for K in (0.0, 2.0, 6.0, 12.0):
            params = BokehParams(FocalSpec(0.9), K=K, N=4)
            out = render_bokeh_frame(Frame(tex), d, params, 0.6)
            variances.append(float(out.pixels.var()))
        assert all(v2 < v1 for v1, v2 in zip(variances, variances[1:]))

    def test_thread_count_does_not_change_pixels(self):
        case = build_two_plane(5, 64, 64)
        params = BokehParams(FocalSpec(case.d_fg), K=10.0, N=8)
        norm = float(np.abs(case.disparity.values - case.d_fg).max())
        one = render_bokeh_frame(case.frame, case.disparity, params, norm, threads=1)
        four = render_bokeh_frame(case.frame, case.disparity, params, norm, threads=4)
        assert np.array_equal(one.pixels, four.pixels)

    def test_debug_reports_every_band(self):
        h = w = 40
        tex = smooth_texture(4, h, w)
        d = np.full((h, w), 0.3, np.float32)
        d[:, : w // 2] = 1.2  # bimodal: middle bands stay empty
        params = BokehParams(FocalSpec(1.2), K=8.0, N=8)
        out, debug = render_bokeh_frame(Frame(tex), DisparityMap(d), params, 0.9, debug=True)
        assert len(debug) == 8
        assert sum(b.pixel_count for b in debug) == h * w
        empty = [b for b in debug if b.pixel_count == 0]
        assert empty and all(b.bbox is None and b.radius > 0 for b in empty)


class TestAgainstRaytraceOracle:
    @pytest.mark.parametrize("seed,K", [(1, 4.0), (2, 8.0), (3, 16.0)])
    def test_two_plane_scene_agreement(self, seed, K):
        case = build_two_plane(seed, 96, 96)
        focal = FocalSpec(case.d_fg)
        ray = render_reference(case.scene, focal, LensConfig(K=K, samples_per_pixel=128), 0)
        params = BokehParams(focal, K=K, N=8)
        norm = float(np.abs(case.disparity.values.astype(np.float64) - focal.d_f).max())
        mpi = render_bokeh_frame(case.frame, case.disparity, params, norm)
        assert psnr(mpi.pixels, ray.pixels) >= 33.0
        edge = (case.fg_alpha > 0) & (case.fg_alpha < 1)
        band = ndimage.binary_dilation(edge, iterations=max(1, int(np.ceil(2 * K * norm))))
        mse_out = float(np.mean((mpi.pixels.astype(np.float64) - ray.pixels)[~band] ** 2))
        assert 10.0 * np.log10(1.0 / mse_out) >= 38.0

    @pytest.mark.parametrize("N", [4, 8, 16])
    def test_disparity_ramp_agreement(self, N):
        # bands straddle the focal plane here, so radii must come from
        # absolute distances; agreement collapses if they cancel instead
        h = w = 80
        tex = smooth_texture(31, h, w)
        ramp = np.linspace(0.3, 1.1, w, dtype=np.float32)[None, :].repeat(h, 0)
        d = DisparityMap(ramp)
        focal = FocalSpec(0.7)
        norm = float(np.abs(ramp.astype(np.float64) - 0.7).max())
        ref = render_gather_frame(
            Frame(tex), d, focal, LensConfig(K=10.0, samples_per_pixel=256), 0
        )
        params = BokehParams(focal, K=10.0, N=N)
        out = render_bokeh_frame(Frame(tex), d, params, norm)
        assert psnr(out.pixels, ref.pixels) >= 34.0


class TestRenderClip:
    def test_length_mismatch_raises(self):
        clip = VideoClip((Frame(smooth_texture(1, 16, 16)),))
        with pytest.raises(DataError):
            render_bokeh_clip(clip, [], BokehParams(FocalSpec(1.0)))

    def test_disparity_shape_mismatch_raises(self):
        clip = VideoClip((Frame(smooth_texture(1, 16, 16)),))
        bad = [DisparityMap(np.ones((16, 17), np.float32))]
        with pytest.raises(DataError):
            render_bokeh_clip(clip, bad, BokehParams(FocalSpec(1.0)))

    def test_clip_norm_is_shared_across_frames(self):
        frames = tuple(Frame(smooth_texture(s, 32, 32)) for s in (1, 2))
        clip = VideoClip(frames)
        d0 = DisparityMap(np.full((32, 32), 0.4, np.float32))
        d1 = np.full((32, 32), 0.4, np.float32)
        d1[0, 0] = 1.6  # only frame 1 carries the clip-wide extreme
        disparities = [d0, DisparityMap(d1)]
        params = BokehParams(FocalSpec(0.8), K=6.0, N=6)
        out = render_bokeh_clip(clip, disparities, params)
        norm = 0.8  # max |d - d_f| over the whole clip
        direct = render_bokeh_frame(frames[0], d0, params, norm)
        assert np.array_equal(out[0].pixels, direct.pixels)
        assert out.frame_rate == clip.frame_rate
