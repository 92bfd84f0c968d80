import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clfm.imgcore import MapRole, ScalarMap
from clfm.spatial import (
    BilateralParams,
    BinaryMask,
    ConfigError,
    bilateral_filter,
    dilate,
    distance_transform,
    resize_area,
    sobel_l1,
    threshold_percentile,
)

from reference_impls import (
    ref_bilateral,
    ref_dilate,
    ref_distance_transform,
    ref_nearest_rank_threshold,
    ref_resize_area,
    ref_sobel_l1,
)


def edge_map(values):
    return ScalarMap(np.asarray(values, dtype=np.float32), MapRole.EDGE)


class TestBilateral:
    def test_constant_is_fixed_point(self):
        out = bilateral_filter(edge_map(np.full((9, 9), 0.37)), BilateralParams())
        assert np.abs(out.data - 0.37).max() <= 1e-6

    def test_tiny_range_sigma_preserves_outlier(self):
        data = np.full((9, 9), 0.1)
        data[4, 4] = 0.9
        out = bilateral_filter(edge_map(data), BilateralParams(sigma_range=1e-4))
        # the range kernel kills all cross-value mixing
        assert abs(out.data[4, 4] - 0.9) <= 1e-6
        assert abs(out.data[0, 0] - 0.1) <= 1e-6

    def test_matches_reference_on_9x9(self, rng):
        data = rng.uniform(0.0, 1.0, (9, 9))
        params = BilateralParams()
        out = bilateral_filter(edge_map(data), params)
        ref = ref_bilateral(data, params.sigma_spatial, params.sigma_range)
        assert np.abs(out.data - ref).max() <= 1e-6

    def test_invalid_sigmas(self):
        with pytest.raises(ConfigError):
            BilateralParams(sigma_spatial=0.0)
        with pytest.raises(ConfigError):
            BilateralParams(sigma_range=-1.0)

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=15, deadline=None)
    def test_output_within_input_range(self, seed):
        rng = np.random.default_rng(seed)
        data = rng.uniform(0.0, 1.0, (10, 10))
        out = bilateral_filter(edge_map(data), BilateralParams(2.0, 0.2))
        assert out.data.min() >= data.min() - 1e-7
        assert out.data.max() <= data.max() + 1e-7


class TestSobel:
    def test_constant_map_is_zero(self):
        assert sobel_l1(edge_map(np.full((9, 9), 0.5))).data.max() == 0.0

    def test_vertical_step_response(self):
        # hand-convolving the 1/8-scaled kernel across a unit step:
        # G_x = (1+2+1)/8 = 0.5 at the two columns flanking the step
        data = np.zeros((8, 8))
        data[:, 4:] = 1.0
        out = sobel_l1(edge_map(data))
        assert np.abs(out.data[:, 3] - 0.5).max() <= 1e-7
        assert np.abs(out.data[:, 4] - 0.5).max() <= 1e-7
        assert np.abs(out.data[:, 1]).max() <= 1e-7

    def test_matches_reference_on_16x16(self, rng):
        data = rng.uniform(0.0, 1.0, (16, 16))
        out = sobel_l1(edge_map(data))
        assert np.abs(out.data - ref_sobel_l1(data)).max() <= 1e-7

    def test_non_negative(self, rng):
        out = sobel_l1(edge_map(rng.uniform(0, 1, (12, 12))))
        assert out.data.min() >= 0.0


class TestDilate:
    def test_radius_zero_is_identity(self, rng):
        mask = BinaryMask((rng.uniform(0, 1, (10, 10)) > 0.8).astype(np.uint8))
        assert np.array_equal(dilate(mask, 0).data, mask.data)

    def test_single_pixel_radius_two(self):
        data = np.zeros((11, 11), np.uint8)
        data[5, 5] = 1
        out = dilate(BinaryMask(data), 2)
        expected = np.zeros((11, 11), np.uint8)
        expected[3:8, 3:8] = 1
        assert np.array_equal(out.data, expected)

    def test_empty_stays_empty(self):
        out = dilate(BinaryMask(np.zeros((9, 9), np.uint8)), 3)
        assert out.data.max() == 0

    @given(seed=st.integers(0, 2**31), r1=st.integers(0, 3), r2=st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_monotone_and_extensive(self, seed, r1, r2):
        rng = np.random.default_rng(seed)
        mask = BinaryMask((rng.uniform(0, 1, (9, 9)) > 0.85).astype(np.uint8))
        small, large = sorted((r1, r2))
        out_small = dilate(mask, small).data
        out_large = dilate(mask, large).data
        assert (out_small >= mask.data).all()  # extensive
        assert (out_large >= out_small).all()  # monotone in radius

    def test_matches_reference(self, rng):
        mask = (rng.uniform(0, 1, (12, 12)) > 0.8).astype(np.uint8)
        assert np.array_equal(dilate(BinaryMask(mask), 2).data, ref_dilate(mask, 2))


class TestDistanceTransform:
    def test_zero_at_mask_pixels(self, rng):
        mask = (rng.uniform(0, 1, (10, 10)) > 0.7).astype(np.uint8)
        out = distance_transform(BinaryMask(mask))
        assert np.abs(out.data[mask > 0]).max() == 0.0

    def test_three_four_five(self):
        mask = np.zeros((12, 12), np.uint8)
        mask[0, 0] = 1
        out = distance_transform(BinaryMask(mask))
        assert out.data[3, 4] == pytest.approx(5.0, abs=1e-6)

    def test_all_zero_sentinel(self):
        out = distance_transform(BinaryMask(np.zeros((7, 9), np.uint8)))
        assert (out.data == 16.0).all()

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        mask = (rng.uniform(0, 1, (12, 12)) > 0.9).astype(np.uint8)
        out = distance_transform(BinaryMask(mask))
        assert np.abs(out.data - ref_distance_transform(mask)).max() <= 1e-6

    def test_lipschitz(self, rng):
        mask = (rng.uniform(0, 1, (16, 16)) > 0.92).astype(np.uint8)
        mask[0, 0] = 1
        d = distance_transform(BinaryMask(mask)).data.astype(np.float64)
        assert np.abs(np.diff(d, axis=0)).max() <= 1.0 + 1e-6
        assert np.abs(np.diff(d, axis=1)).max() <= 1.0 + 1e-6


class TestResizeArea:
    def test_constant(self):
        out = resize_area(edge_map(np.full((8, 8), 0.4)), 2, 2)
        assert np.abs(out.data - 0.4).max() <= 1e-7

    def test_2x2_block_mean(self):
        out = resize_area(edge_map(np.array([[1.0, 1.0], [0.2, 0.2]])), 1, 1)
        assert out.data[0, 0] == pytest.approx(0.6, abs=1e-7)

    def test_mean_preserved(self, rng):
        data = rng.uniform(0, 1, (16, 24))
        out = resize_area(edge_map(data), 4, 6)
        in_mean = edge_map(data).data.mean(dtype=np.float64)
        assert abs(out.data.mean(dtype=np.float64) - in_mean) <= 1e-7

    def test_non_integer_factor_rejected(self):
        with pytest.raises(ConfigError):
            resize_area(edge_map(np.zeros((10, 10))), 3, 5)

    def test_matches_reference(self, rng):
        data = rng.uniform(0, 1, (12, 8))
        out = resize_area(edge_map(data), 4, 4)
        assert np.abs(out.data - ref_resize_area(data, 4, 4)).max() <= 1e-6


class TestThresholdPercentile:
    def test_constant_below_floor_gives_empty(self):
        out = threshold_percentile(edge_map(np.full((8, 8), 0.5)), 90.0, 0.7)
        assert out.data.max() == 0

    def test_uniform_ramp_nearest_rank(self):
        # values 0..99: nearest-rank 90th percentile is the 90th sorted
        # value (89), so exactly the ten values 90..99 exceed it
        data = np.arange(100, dtype=np.float64).reshape(10, 10)
        out = threshold_percentile(edge_map(data), 90.0, 0.0)
        assert int(out.data.sum()) == 10

    def test_sobel_of_constant_yields_empty(self):
        edges = sobel_l1(edge_map(np.full((9, 9), 0.3)))
        out = threshold_percentile(edges, 90.0, 1e-3)
        assert out.data.max() == 0

    def test_invalid_percentile(self):
        with pytest.raises(ConfigError):
            threshold_percentile(edge_map(np.zeros((8, 8))), 0.0, 0.0)

    def test_matches_reference(self, rng):
        data = rng.uniform(0, 1, (9, 9))
        out = threshold_percentile(edge_map(data), 90.0, 0.05)
        assert np.array_equal(out.data, ref_nearest_rank_threshold(data, 90.0, 0.05))
