import math

import numpy as np
import pytest

from specforge import SpectralCube, ValidationError, l1, mrae, psnr, report, rmse, sam
from specforge.metrics import MRAE_EPS

from conftest import make_grid, make_random_cube


def cube_of(values):
    values = np.asarray(values, dtype=np.float64)
    return SpectralCube(values, make_grid(values.shape[0]), normalized=False)


def hand_rmse(a, b):
    total = 0.0
    count = 0
    for x, y in zip(a.ravel(), b.ravel()):
        total += (x - y) ** 2
        count += 1
    return math.sqrt(total / count)


class TestMRAE:
    def test_identity(self, rng):
        cube = make_random_cube(rng, 4, 3, 3)
        assert mrae(cube, cube) == 0.0

    def test_constant_relative_error(self):
        gt = cube_of(np.full((2, 2, 2), 0.5))
        est = cube_of(np.full((2, 2, 2), 0.6))
        assert abs(mrae(est, gt) - 0.2) < 1e-12

    def test_dark_pixel_floor(self):
        gt = cube_of(np.zeros((1, 1, 1)))
        est = cube_of(np.full((1, 1, 1), 0.1))
        value = mrae(est, gt)
        assert abs(value - 0.1 / MRAE_EPS) < 1e-4 * abs(value)
        assert report(est, gt).denom_floored_mrae == 1

    def test_relative_invariance(self, rng):
        gt = cube_of(0.1 + rng.random((5, 4, 4)))
        est = cube_of(0.1 + rng.random((5, 4, 4)))
        scaled = abs(mrae(cube_of(3.0 * est.data), cube_of(3.0 * gt.data)) - mrae(est, gt))
        assert scaled < 1e-12

    def test_dim_mismatch(self, rng):
        with pytest.raises(ValidationError):
            mrae(make_random_cube(rng, 3, 2, 2), make_random_cube(rng, 3, 3, 3))


class TestRMSE:
    def test_identity(self, rng):
        cube = make_random_cube(rng, 4, 3, 3)
        assert rmse(cube, cube) == 0.0

    def test_constant_error(self):
        gt = cube_of(np.full((3, 2, 2), 0.4))
        est = cube_of(np.full((3, 2, 2), 0.5))
        assert abs(rmse(est, gt) - 0.1) < 1e-12

    def test_matches_hand_summation(self, rng):
        gt = rng.random((3, 2, 2))
        est = rng.random((3, 2, 2))
        assert abs(rmse(cube_of(est), cube_of(gt)) - hand_rmse(est, gt)) < 1e-12

    def test_homogeneity(self, rng):
        gt = rng.random((4, 3, 3))
        est = rng.random((4, 3, 3))
        c = 2.5
        left = rmse(cube_of(c * est), cube_of(c * gt))
        assert abs(left - c * rmse(cube_of(est), cube_of(gt))) < 1e-12


class TestPSNR:
    def test_identity_is_infinite(self, rng):
        cube = make_random_cube(rng, 4, 3, 3)
        assert psnr(cube, cube) == math.inf

    def test_uniform_error_20db(self):
        gt = cube_of(np.full((3, 4, 4), 0.5))
        est = cube_of(np.full((3, 4, 4), 0.6))
        assert abs(psnr(est, gt) - 20.0) < 1e-9

    def test_band_average_hand_value(self):
        # per-band MSEs 0.01 and 0.04 average the two dB terms
        gt = np.full((2, 4, 4), 0.5)
        est = gt.copy()
        est[0] += 0.1
        est[1] += 0.2
        expected = (20.0 + 20.0 * math.log10(1.0 / 0.2)) / 2.0
        assert abs(psnr(cube_of(est), cube_of(gt)) - expected) < 1e-9
        assert abs(expected - 16.989700043360187) < 1e-12

    def test_any_zero_band_infinite(self):
        gt = np.full((2, 2, 2), 0.5)
        est = gt.copy()
        est[1] += 0.125
        assert psnr(cube_of(est), cube_of(gt)) == math.inf

    def test_max_value_override(self):
        gt = cube_of(np.full((1, 2, 2), 0.0))
        est = cube_of(np.full((1, 2, 2), 0.1))
        assert abs(psnr(est, gt, max_value=2.0) - 20.0 * math.log10(2.0 / 0.1)) < 1e-9


class TestSAM:
    def test_identity_is_exactly_zero(self, rng):
        cube = make_random_cube(rng, 5, 4, 4)
        assert sam(cube, cube) == 0.0

    def test_orthogonal_pixel(self):
        gt = cube_of(np.array([1.0, 0.0]).reshape(2, 1, 1))
        est = cube_of(np.array([0.0, 1.0]).reshape(2, 1, 1))
        assert abs(sam(est, gt) - math.pi / 2) < 1e-12

    def test_45_degree_pixel(self):
        gt = cube_of(np.array([1.0, 0.0]).reshape(2, 1, 1))
        est = cube_of(np.array([1.0, 1.0]).reshape(2, 1, 1))
        assert abs(sam(est, gt) - math.pi / 4) < 1e-12

    def test_scale_invariance(self, rng):
        gt = cube_of(0.1 + rng.random((6, 4, 4)))
        est = cube_of(0.1 + rng.random((6, 4, 4)))
        assert abs(sam(cube_of(7.0 * est.data), gt) - sam(est, gt)) < 1e-12

    def test_zero_norm_pixels_excluded(self):
        gt = np.zeros((2, 1, 2))
        est = np.zeros((2, 1, 2))
        gt[:, 0, 0] = [1.0, 0.0]
        est[:, 0, 0] = [0.0, 1.0]
        # second pixel is zero in both and must not drag the mean
        rep = report(cube_of(est), cube_of(gt))
        assert abs(rep.sam_rad - math.pi / 2) < 1e-12
        assert rep.pixels_excluded_sam == 1

    def test_all_pixels_excluded(self):
        zeros = cube_of(np.zeros((2, 2, 2)))
        rep = report(zeros, zeros)
        assert rep.sam_rad == 0.0
        assert rep.pixels_excluded_sam == 4


class TestL1:
    def test_identity(self, rng):
        cube = make_random_cube(rng, 3, 3, 3)
        assert l1(cube, cube) == 0.0

    def test_constant_offset(self):
        gt = cube_of(np.full((2, 3, 3), 0.3))
        est = cube_of(np.full((2, 3, 3), 0.35))
        assert abs(l1(est, gt) - 0.05) < 1e-12

    def test_equals_mrae_for_unit_ground_truth(self, rng):
        gt = cube_of(np.ones((4, 3, 3)))
        est = cube_of(rng.random((4, 3, 3)))
        assert abs(l1(est, gt) - mrae(est, gt)) < 1e-15


class TestReport:
    def test_matches_individual_calls(self, rng):
        est = make_random_cube(rng, 5, 4, 4)
        gt = make_random_cube(rng, 5, 4, 4)
        rep = report(est, gt)
        assert rep.mrae == mrae(est, gt)
        assert rep.rmse == rmse(est, gt)
        assert rep.psnr_db == psnr(est, gt)
        assert rep.sam_rad == sam(est, gt)
        assert rep.l1 == l1(est, gt)

    def test_counts_bounded_by_pixels(self, rng):
        est = make_random_cube(rng, 5, 4, 4)
        gt = make_random_cube(rng, 5, 4, 4)
        rep = report(est, gt)
        assert 0 <= rep.pixels_excluded_sam <= 16
        assert 0 <= rep.denom_floored_mrae <= 5 * 16

    def test_works_on_rgb_images(self, rng):
        from specforge import RGBImage

        a = RGBImage(rng.random((3, 4, 4)))
        b = RGBImage(rng.random((3, 4, 4)))
        rep = report(a, b)
        assert np.isfinite(rep.psnr_db)

    def test_pixel_permutation_invariance(self, rng):
        est = rng.random((4, 3, 5))
        gt = rng.random((4, 3, 5))
        perm = rng.permutation(15)
        est_p = est.reshape(4, 15)[:, perm].reshape(4, 3, 5)
        gt_p = gt.reshape(4, 15)[:, perm].reshape(4, 3, 5)
        before = report(cube_of(est), cube_of(gt))
        after = report(cube_of(est_p), cube_of(gt_p))
        assert abs(before.mrae - after.mrae) < 1e-12
        assert abs(before.rmse - after.rmse) < 1e-12
        assert abs(before.psnr_db - after.psnr_db) < 1e-9
        assert abs(before.sam_rad - after.sam_rad) < 1e-12
        assert abs(before.l1 - after.l1) < 1e-12
