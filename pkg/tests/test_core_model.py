"""Data model validation and file round trips."""

import numpy as np
import pytest

from conftest import lattice_clip, lattice_frame, smooth_texture
from vidbokeh.core_model import (
    BokehParams,
    ClipMeta,
    DataError,
    DisparityMap,
    FocalSpec,
    Frame,
    VideoClip,
    linear_to_srgb,
    load_frame_sequence,
    read_meta,
    read_pfm,
    save_disparity_sequence,
    save_frame_sequence,
    srgb_to_linear,
    write_meta,
    write_pfm,
)


class TestFrame:
    def test_rejects_bad_shape(self):
        with pytest.raises(DataError):
            Frame(np.zeros((4, 4), np.float32))
        with pytest.raises(DataError):
            Frame(np.zeros((4, 4, 4), np.float32))

    def test_rejects_non_finite(self):
        bad = np.zeros((2, 2, 3), np.float32)
        bad[0, 0, 0] = np.nan
        with pytest.raises(DataError):
            Frame(bad)

    def test_clamps_to_unit_range(self):
        f = Frame(np.array([[[2.0, -1.0, 0.5]]], np.float32))
        assert f.pixels.min() >= 0.0 and f.pixels.max() <= 1.0

    def test_is_immutable(self):
        f = Frame(np.zeros((2, 3, 3), np.float32))
        with pytest.raises(ValueError):
            f.pixels[0, 0, 0] = 1.0
        assert (f.height, f.width) == (2, 3)


class TestVideoClip:
    def test_rejects_mixed_dimensions(self):
        a = Frame(np.zeros((4, 4, 3), np.float32))
        b = Frame(np.zeros((4, 5, 3), np.float32))
        with pytest.raises(DataError):
            VideoClip((a, b))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            VideoClip(())

    def test_indexing(self):
        clip = lattice_clip(3, 4, 6, 8)
        assert len(clip) == 4
        assert clip[1] is clip.frames[1]
        assert (clip.height, clip.width) == (6, 8)


class TestDisparityMap:
    def test_rejects_non_positive(self):
        with pytest.raises(DataError):
            DisparityMap(np.zeros((3, 3), np.float32))
        with pytest.raises(DataError):
            DisparityMap(np.full((3, 3), -1.0, np.float32))

    def test_rejects_wrong_rank(self):
        with pytest.raises(DataError):
            DisparityMap(np.ones((3, 3, 1), np.float32))

    def test_accepts_any_positive_scale(self):
        d = DisparityMap(np.full((2, 2), 137.5, np.float32))
        assert float(d.values.max()) == 137.5


def test_focal_spec_reciprocal_depth():
    assert FocalSpec(0.25).z_f == pytest.approx(4.0)
    with pytest.raises(DataError):
        FocalSpec(0.0)
    with pytest.raises(DataError):
        FocalSpec(-1.0)


def test_bokeh_params_validation():
    focal = FocalSpec(0.5)
    assert BokehParams(focal, K=0.0, N=2).K == 0.0
    with pytest.raises(DataError):
        BokehParams(focal, K=-1.0)
    with pytest.raises(DataError):
        BokehParams(focal, N=1)


class TestSrgbTransfer:
    def test_round_trip_is_identity(self):
        x = np.linspace(0.0, 1.0, 1024)
        assert np.abs(linear_to_srgb(srgb_to_linear(x)) - x).max() < 1e-12
        assert np.abs(srgb_to_linear(linear_to_srgb(x)) - x).max() < 1e-12

    def test_linear_segment_boundary(self):
        assert srgb_to_linear(0.04045) == pytest.approx(0.04045 / 12.92, abs=1e-12)
        assert linear_to_srgb(0.0031308) == pytest.approx(0.04045, abs=1e-4)

    def test_monotonic_and_bounded(self):
        x = np.linspace(0.0, 1.0, 257)
        y = srgb_to_linear(x)
        assert np.all(np.diff(y) > 0)
        assert y[0] == 0.0 and y[-1] == pytest.approx(1.0, abs=1e-12)


class TestPfm:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        values = rng.uniform(1e-3, 10.0, size=(17, 23)).astype(np.float32)
        path = tmp_path / "x.pfm"
        write_pfm(path, values)
        assert np.array_equal(read_pfm(path), values)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"not a pfm at all")
        with pytest.raises(DataError):
            read_pfm(path)

    def test_rejects_truncated(self, tmp_path):
        path = tmp_path / "t.pfm"
        write_pfm(path, np.ones((4, 4), np.float32))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(DataError):
            read_pfm(path)


class TestFrameSequenceIo:
    def test_8bit_round_trip_on_code_lattice(self, tmp_path):
        clip = lattice_clip(9, 3, 12, 16)
        save_frame_sequence(clip, tmp_path, bit_depth=8)
        back = load_frame_sequence(tmp_path, kind="rgb")
        for a, b in zip(clip.frames, back.frames):
            assert np.abs(a.pixels - b.pixels).max() <= 1.0 / 255.0

    def test_16bit_round_trip_tight(self, tmp_path):
        clip = VideoClip((Frame(smooth_texture(4, 20, 24)),))
        save_frame_sequence(clip, tmp_path, bit_depth=16)
        back = load_frame_sequence(tmp_path, kind="rgb")
        # one 16-bit code step spans at most ~2.4/65535 in linear light
        assert np.abs(clip[0].pixels - back[0].pixels).max() < 1e-4

    def test_meta_survives(self, tmp_path):
        clip = VideoClip((lattice_frame(1, 8, 8),), frame_rate=30.0)
        save_frame_sequence(clip, tmp_path)
        assert load_frame_sequence(tmp_path).frame_rate == 30.0

    def test_numeric_ordering(self, tmp_path):
        for name, value in (("frame_10.png", 200), ("frame_2.png", 30)):
            coded = np.full((4, 4, 3), value, np.uint8)
            import cv2

            cv2.imwrite(str(tmp_path / name), coded)
        clip = load_frame_sequence(tmp_path)
        # numeric sort puts 2 before 10 even though strings sort the other way
        assert clip[0].pixels.mean() < clip[1].pixels.mean()

    def test_missing_directory_raises(self, tmp_path):
        with pytest.raises(DataError):
            load_frame_sequence(tmp_path / "nope")

    def test_empty_directory_raises(self, tmp_path):
        with pytest.raises(DataError):
            load_frame_sequence(tmp_path)

    def test_unknown_kind_raises(self, tmp_path):
        with pytest.raises(ValueError):
            load_frame_sequence(tmp_path, kind="flow")


class TestDisparityIo:
    def test_pfm_sequence_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(6)
        maps = [DisparityMap(rng.uniform(0.1, 3.0, (10, 14)).astype(np.float32)) for _ in range(3)]
        save_disparity_sequence(maps, tmp_path, fmt="pfm")
        back = load_frame_sequence(tmp_path, kind="disparity")
        assert len(back) == 3
        for a, b in zip(maps, back):
            assert np.array_equal(a.values, b.values)

    def test_png16_sequence_scales_back(self, tmp_path):
        rng = np.random.default_rng(7)
        maps = [DisparityMap(rng.uniform(0.5, 4.0, (10, 14)).astype(np.float32)) for _ in range(2)]
        save_disparity_sequence(maps, tmp_path, fmt="png16")
        back = load_frame_sequence(tmp_path, kind="disparity")
        peak = max(float(m.values.max()) for m in maps)
        for a, b in zip(maps, back):
            assert np.abs(a.values - b.values).max() <= peak / 65535.0 + 1e-6

    def test_bad_format_raises(self, tmp_path):
        with pytest.raises(ValueError):
            save_disparity_sequence([DisparityMap(np.ones((4, 4), np.float32))], tmp_path, fmt="exr")


def test_meta_round_trip_preserves_unknown_keys(tmp_path):
    meta = ClipMeta(frame_rate=24.0, disparity_scale=2.5, extra={"camera": "left"})
    write_meta(tmp_path, meta)
    back = read_meta(tmp_path)
    assert back.frame_rate == 24.0
    assert back.disparity_scale == 2.5
    assert back.extra["camera"] == "left"
