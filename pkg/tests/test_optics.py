"""Layer thresholds, nested masks, and the circle-of-confusion law."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidbokeh.core_model import DataError, DisparityMap, FocalSpec
from vidbokeh.optics import (
    MpiMask,
    build_mpi_mask,
    coc_radius,
    disparity_difference_map,
    exclusive_bands,
    export_mask_stack,
    export_vd_png,
    layer_thresholds,
    threshold_exponent,
)


def random_disparity(seed: int, h: int = 32, w: int = 32, lo: float = 0.1, hi: float = 2.0):
    rng = np.random.default_rng(seed)
    return DisparityMap(rng.uniform(lo, hi, size=(h, w)).astype(np.float32))


class TestCocRadius:
    def test_linear_in_distance(self):
        focal = FocalSpec(0.5)
        assert coc_radius(0.5, focal, 12.0) == 0.0
        assert coc_radius(0.75, focal, 12.0) == pytest.approx(3.0)
        assert coc_radius(0.25, focal, 12.0) == pytest.approx(3.0)

    def test_array_input(self):
        focal = FocalSpec(1.0)
        d = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(coc_radius(d, focal, 4.0), [2.0, 0.0, 4.0])

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            coc_radius(np.inf, FocalSpec(1.0), 1.0)


class TestThresholds:
    def test_exponent_clamps(self):
        assert threshold_exponent(FocalSpec(1.0)) == 1.0
        assert threshold_exponent(FocalSpec(0.5)) == 1.0   # 1/d_f = 2, clamped down
        assert threshold_exponent(FocalSpec(2.0)) == 0.5
        assert threshold_exponent(FocalSpec(10000.0)) == 1e-3  # floored

    def test_unit_focus_gives_even_spacing(self):
        sched = layer_thresholds(4, FocalSpec(1.0))
        assert sched.h == (0.25, 0.5, 0.75)

    def test_power_schedule_values(self):
        sched = layer_thresholds(4, FocalSpec(2.0))
        np.testing.assert_allclose(sched.h, [np.sqrt(0.25), np.sqrt(0.5), np.sqrt(0.75)])

    @given(
        N=st.integers(min_value=2, max_value=32),
        d_f=st.floats(min_value=1e-3, max_value=1e4, allow_nan=False, allow_infinity=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_strictly_increasing_in_unit_interval(self, N, d_f):
        sched = layer_thresholds(N, FocalSpec(d_f))
        h = np.array(sched.h)
        assert len(h) == N - 1
        assert np.all(h > 0.0) and np.all(h < 1.0)
        assert np.all(np.diff(h) > 0.0)

    def test_band_bounds_tile_unit_interval(self):
        sched = layer_thresholds(6, FocalSpec(0.8))
        bounds = [sched.band_bounds(i) for i in range(1, 7)]
        assert bounds[0][0] == 0.0 and bounds[-1][1] == 1.0
        for (_, hi), (lo, _) in zip(bounds[:-1], bounds[1:]):
            assert hi == lo

    def test_rejects_single_layer(self):
        with pytest.raises(DataError):
            layer_thresholds(1, FocalSpec(1.0))


class TestDifferenceMap:
    def test_norm_is_clip_maximum(self):
        focal = FocalSpec(1.0)
        d0 = DisparityMap(np.array([[0.5, 1.0], [1.5, 1.0]], np.float32))
        d1 = DisparityMap(np.array([[1.0, 1.0], [1.0, 3.0]], np.float32))
        maps, norm = disparity_difference_map([d0, d1], focal)
        assert norm == pytest.approx(2.0)
        assert maps[1].values.max() == pytest.approx(1.0)
        assert maps[0].values.max() == pytest.approx(0.25)
        assert all(m.norm_constant == norm for m in maps)

    def test_all_in_focus_clip_degenerates_to_zero(self):
        focal = FocalSpec(0.75)
        d = DisparityMap(np.full((4, 4), 0.75, np.float32))
        maps, norm = disparity_difference_map([d], focal)
        assert norm == 0.0
        assert maps[0].values.max() == 0.0

    def test_empty_sequence_raises(self):
        with pytest.raises(DataError):
            disparity_difference_map([], FocalSpec(1.0))


class TestMpiMask:
    def test_membership_matches_definition(self):
        focal = FocalSpec(0.6)
        d = random_disparity(1)
        _, norm = disparity_difference_map([d], focal)
        mask = build_mpi_mask(d, focal, 5, norm)
        sched = layer_thresholds(5, focal)
        scaled = np.abs(d.values.astype(np.float64) - focal.d_f) / norm
        for i, h in enumerate(sched.h):
            assert np.array_equal(mask.layers[i], scaled < h)
        assert mask.layers[-1].all()

    @pytest.mark.parametrize("seed", range(6))
    def test_nesting_holds_on_random_maps(self, seed):
        focal = FocalSpec(0.5 + 0.1 * seed)
        d = random_disparity(seed)
        _, norm = disparity_difference_map([d], focal)
        for N in (2, 4, 9):
            build_mpi_mask(d, focal, N, norm).validate_nesting()

    def test_nesting_violation_detected(self):
        layers = np.ones((3, 4, 4), dtype=bool)
        layers[1, 2, 2] = False  # inner layer member missing from outer
        layers[0, 2, 2] = True
        with pytest.raises(DataError):
            MpiMask(layers).validate_nesting()

    def test_all_at_focus_lands_in_innermost_layer(self):
        # 0.75 is exact in float32, so the distance to focus is exactly zero
        focal = FocalSpec(0.75)
        d = DisparityMap(np.full((4, 4), 0.75, np.float32))
        mask = build_mpi_mask(d, focal, 4, 0.0)
        assert mask.layers.all()

    def test_zero_norm_with_defocus_rejected(self):
        d = DisparityMap(np.array([[0.5, 1.5]], np.float32))
        with pytest.raises(DataError):
            build_mpi_mask(d, FocalSpec(1.0), 4, 0.0)


class TestExclusiveBands:
    @pytest.mark.parametrize("seed", range(4))
    def test_bands_partition_pixels(self, seed):
        focal = FocalSpec(0.7)
        d = random_disparity(seed + 10)
        _, norm = disparity_difference_map([d], focal)
        mask = build_mpi_mask(d, focal, 6, norm)
        bands = exclusive_bands(mask)
        assert np.array_equal(bands.sum(axis=0), np.ones(d.values.shape, dtype=np.int64))

    def test_band_index_is_first_containing_layer(self):
        layers = np.zeros((3, 1, 3), dtype=bool)
        layers[0, 0, 0] = True
        layers[1, 0, :2] = True
        layers[2] = True
        bands = exclusive_bands(MpiMask(layers))
        assert bands[:, 0, 0].tolist() == [True, False, False]
        assert bands[:, 0, 1].tolist() == [False, True, False]
        assert bands[:, 0, 2].tolist() == [False, False, True]


def test_debug_exports_write_readable_files(tmp_path):
    focal = FocalSpec(0.8)
    d = random_disparity(3, 16, 16)
    maps, norm = disparity_difference_map([d], focal)
    png = tmp_path / "vd.png"
    export_vd_png(maps[0], png)
    assert png.stat().st_size > 0

    mask = build_mpi_mask(d, focal, 4, norm)
    paths = export_mask_stack(mask, tmp_path / "mask")
    assert len(paths) == 4
    assert all(p.exists() for p in paths)
