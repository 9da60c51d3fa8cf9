# -*- coding: utf-8 -*-
#
# Copyright © 2026 The adv-recon-python authors. All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import numpy as np
import pytest
from pytest import mark as m

from adv_recon import autodiff as ad
from adv_recon.exception import ShapeError
from adv_recon.mri import (
    NoiseModel,
    SamplingMask,
    SensitivityMaps,
    add_thermal_noise,
    apply_mask,
    center_crop,
    coil_images,
    coil_norms,
    default_center_fraction,
    estimate_background_noise,
    make_cartesian_mask,
    rotate_image,
    rss_combine,
    simulate_sensitivity_maps,
    synthesize_kspace,
    thermal_noise_comparability,
)


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@m.describe("Acquisition model")
class TestAcquisition:
    @m.context("When k-space is synthesised with RSS-normalised maps")
    @m.it("Is recovered by inverse FFT and RSS combination")
    def test_roundtrip(self, rng):
        image = rng.random((32, 32))
        maps = simulate_sensitivity_maps((32, 32), 8, seed=1)
        k = synthesize_kspace(image, maps)

        assert k.shape == (8, 32, 32)
        assert ad.relative_error(rss_combine(coil_images(k)), image) < 1e-8

    @m.context("When there is one coil of unit sensitivity")
    @m.it("Reconstructs the magnitude image")
    def test_single_coil(self, rng):
        image = rng.random((16, 20))
        maps = SensitivityMaps(np.ones((1, 16, 20), dtype=np.complex128))
        k = synthesize_kspace(image, maps)

        np.testing.assert_allclose(np.abs(coil_images(k)[0]), image, atol=1e-12)

    @m.context("When two coils have complementary sensitivities")
    @m.it("Reconstructs the image by RSS")
    def test_two_coils(self, rng):
        image = rng.random((16, 16))
        ones = np.ones((16, 16))
        maps = SensitivityMaps(np.stack([0.6 * ones, 0.8j * ones]))
        k = synthesize_kspace(image, maps)

        assert ad.relative_error(rss_combine(coil_images(k)), image) < 1e-12

    @m.context("When image and maps differ in shape")
    @m.it("Raises a ShapeError")
    def test_shape_mismatch(self):
        maps = SensitivityMaps(np.ones((2, 8, 8)))
        with pytest.raises(ShapeError):
            synthesize_kspace(np.ones((8, 9)), maps)

    @m.context("When simulating sensitivity maps")
    @m.it("Normalises their RSS to 1 inside the support and 0 outside")
    def test_simulated_maps(self):
        support = np.zeros((32, 32), dtype=bool)
        support[4:28, 2:30] = True
        maps = simulate_sensitivity_maps((32, 32), 4, seed=9, support=support)

        assert maps.num_coils == 4
        assert maps.rss_deviation() < 1e-6
        assert np.all(maps.maps[:, ~support] == 0)

    @m.context("When maps do not have three dimensions")
    @m.it("Raises a ShapeError")
    def test_bad_maps(self):
        with pytest.raises(ShapeError):
            SensitivityMaps(np.ones((8, 8)))


@m.describe("Cartesian masks")
class TestMask:
    @m.context("When undersampling 64 columns at R=4")
    @m.it("Samples 16 columns, including the 5 central ones")
    def test_r4_width_64(self):
        mask = make_cartesian_mask(64, 4, seed=0)

        assert mask.num_sampled == 16
        assert np.all(mask.columns[30:35])
        assert mask.center_fraction == 0.08

    @m.context("When undersampling 100 columns at R=4")
    @m.it("Samples 25 columns")
    def test_r4_width_100(self):
        assert make_cartesian_mask(100, 4, seed=3).num_sampled == 25

    @m.context("When the central block fills the quota")
    @m.it("Samples exactly the central columns")
    def test_center_only(self):
        mask = make_cartesian_mask(16, 4, center_fraction=0.25)

        expected = np.zeros(16, dtype=bool)
        expected[6:10] = True
        assert np.array_equal(mask.columns, expected)

    @m.context("When the central block exceeds the quota")
    @m.it("Raises a ValueError")
    def test_infeasible(self):
        with pytest.raises(ValueError, match="Infeasible"):
            make_cartesian_mask(16, 8, center_fraction=0.5)

    @m.context("When the width is below 8 columns")
    @m.it("Raises a ValueError")
    def test_too_narrow(self):
        with pytest.raises(ValueError):
            make_cartesian_mask(6, 4)

    @m.context("When no default center fraction exists for R")
    @m.it("Raises a ValueError")
    def test_no_default(self):
        with pytest.raises(ValueError):
            default_center_fraction(3)

    @m.context("When masks are made for a range of widths")
    @m.it("Samples within one column of a 1/R fraction")
    @pytest.mark.parametrize("acceleration", [4, 8])
    def test_fraction(self, acceleration):
        for width in range(32, 160, 7):
            mask = make_cartesian_mask(width, acceleration, seed=width)
            assert abs(mask.num_sampled / width - 1 / acceleration) <= 1 / width

    @m.context("When made twice with the same seed")
    @m.it("Is identical")
    @pytest.mark.parametrize("random", [False, True])
    def test_deterministic(self, random):
        a = make_cartesian_mask(64, 8, seed=17, random=random)
        b = make_cartesian_mask(64, 8, seed=17, random=random)

        assert a == b
        assert hash(a) == hash(b)

    @m.context("When columns are chosen at random")
    @m.it("Keeps the quota and the central block, and varies with the seed")
    def test_random(self):
        a = make_cartesian_mask(64, 4, seed=1, random=True)
        b = make_cartesian_mask(64, 4, seed=2, random=True)

        assert a.num_sampled == b.num_sampled == 16
        assert np.all(a.columns[30:35]) and np.all(b.columns[30:35])
        assert a != b

    @m.context("When mask values are not binary")
    @m.it("Raises a ValueError")
    def test_non_binary(self):
        with pytest.raises(ValueError):
            SamplingMask(np.array([0, 2, 1]), 4, 0.08)


@m.describe("Masking k-space")
class TestApplyMask:
    @m.context("When a mask is applied")
    @m.it("Leaves sampled columns bit-identical and zeroes the rest")
    def test_apply(self, rng):
        k = crandn(rng, 3, 16, 32)
        mask = make_cartesian_mask(32, 4, seed=5)
        masked = apply_mask(k, mask)

        assert np.array_equal(masked[..., mask.columns], k[..., mask.columns])
        assert np.all(masked[..., ~mask.columns] == 0)
        assert np.all(coil_norms(masked) <= coil_norms(k))

    @m.context("When a mask is applied twice")
    @m.it("Is idempotent")
    def test_idempotent(self, rng):
        k = crandn(rng, 2, 8, 32)
        mask = make_cartesian_mask(32, 8, seed=2)
        once = apply_mask(k, mask)

        assert np.array_equal(apply_mask(once, mask), once)

    @m.context("When every column is sampled")
    @m.it("Is the identity")
    def test_full(self, rng):
        k = crandn(rng, 2, 8, 12)
        assert np.array_equal(apply_mask(k, SamplingMask.full(12)), k)

    @m.context("When applied to a tensor")
    @m.it("Gives the same values as for an array")
    def test_tensor(self, rng):
        k = crandn(rng, 2, 8, 16)
        mask = make_cartesian_mask(16, 4, center_fraction=0.25)
        t = ad.Tape().leaf(k)

        assert np.array_equal(apply_mask(t, mask).value, apply_mask(k, mask))

    @m.context("When the mask width differs from the k-space width")
    @m.it("Raises a ShapeError")
    def test_width_mismatch(self, rng):
        with pytest.raises(ShapeError):
            apply_mask(crandn(rng, 1, 8, 16), SamplingMask.full(12))


@m.describe("Thermal noise")
class TestNoise:
    @m.context("When sigma is 0")
    @m.it("Returns k-space unchanged")
    def test_zero(self, rng):
        k = crandn(rng, 2, 8, 8)
        assert np.array_equal(add_thermal_noise(k, NoiseModel(0.0, seed=1)), k)

    @m.context("When noise is added to 100,000 samples")
    @m.it("Has the configured standard deviation per component, within 2%")
    def test_std(self):
        k = np.zeros((1, 100, 1000), dtype=np.complex128)
        noisy = add_thermal_noise(k, NoiseModel(0.1, seed=5))

        assert abs(np.std(noisy.real) / 0.1 - 1) < 0.02
        assert abs(np.std(noisy.imag) / 0.1 - 1) < 0.02

    @m.context("When noise is added twice with the same seed")
    @m.it("Is identical, and differs for another seed")
    def test_seeded(self):
        k = np.zeros((1, 8, 8), dtype=np.complex128)
        a = add_thermal_noise(k, NoiseModel(0.1, seed=1))

        assert np.array_equal(a, add_thermal_noise(k, NoiseModel(0.1, seed=1)))
        assert not np.array_equal(a, add_thermal_noise(k, NoiseModel(0.1, seed=2)))

    @m.context("When sigma is negative")
    @m.it("Raises a ValueError")
    def test_negative(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.1)

    @m.context("When a budget is expressed as thermal noise")
    @m.it("Gives a sigma whose noise norm matches the budget")
    def test_comparability(self, rng):
        k = crandn(rng, 2, 128, 128)
        eta = 0.02
        sigma = thermal_noise_comparability(k, eta)

        assert sigma.shape == (2,)
        for i in range(2):
            noise = add_thermal_noise(np.zeros((1, 128, 128)), NoiseModel(sigma[i], i))
            expected = eta * coil_norms(k)[i]
            assert abs(coil_norms(noise)[0] / expected - 1) < 0.02


@m.describe("Background noise estimation")
class TestBackgroundNoise:
    @m.context("When the background is exactly zero")
    @m.it("Estimates zero")
    def test_zero(self):
        image = np.zeros((16, 16))
        assert estimate_background_noise(image, np.ones((16, 16), dtype=bool)) == 0

    @m.context("When a single-coil background has sigma 0.05")
    @m.it("Estimates sigma within 10% in every trial")
    def test_single_coil(self):
        background = np.ones((64, 64), dtype=bool)
        for seed in range(20):
            k = add_thermal_noise(
                np.zeros((1, 64, 64), dtype=np.complex128), NoiseModel(0.05, seed)
            )
            image = rss_combine(coil_images(k))
            assert 0.045 <= estimate_background_noise(image, background) <= 0.055

    @m.context("When several coils are combined")
    @m.it("Corrects for the chi distribution of the RSS")
    def test_multi_coil(self):
        k = add_thermal_noise(
            np.zeros((4, 64, 64), dtype=np.complex128), NoiseModel(0.05, seed=3)
        )
        image = rss_combine(coil_images(k))
        estimate = estimate_background_noise(
            image, np.ones((64, 64), dtype=bool), num_coils=4
        )

        assert 0.045 <= estimate <= 0.055

    @m.context("When the anatomy changes but the background does not")
    @m.it("Gives the same estimate")
    def test_anatomy_invariance(self, rng):
        image = np.abs(crandn(rng, 32, 32)) * 0.05
        background = np.zeros((32, 32), dtype=bool)
        background[:8] = True
        changed = image.copy()
        changed[8:] += 10

        assert estimate_background_noise(
            image, background
        ) == estimate_background_noise(changed, background)

    @m.context("When the background mask is empty")
    @m.it("Raises a ValueError")
    def test_empty(self):
        with pytest.raises(ValueError):
            estimate_background_noise(np.ones((4, 4)), np.zeros((4, 4), dtype=bool))


@m.describe("RSS combination and cropping")
class TestCombine:
    @m.context("When combining coil values 3 and 4i")
    @m.it("Gives 5")
    def test_pythagoras(self):
        images = np.array([[[3.0 + 0j]], [[4j]]])
        assert rss_combine(images)[0, 0] == 5.0

    @m.context("When one coil has value 3 - 4i")
    @m.it("Gives its magnitude")
    def test_single(self):
        assert rss_combine(np.array([[[3 - 4j]]]))[0, 0] == 5.0

    @m.context("When a coil's phase changes")
    @m.it("Gives the same image")
    def test_phase_invariance(self, rng):
        images = crandn(rng, 3, 8, 8)
        rotated = images * np.exp(1j * np.array([0.3, -1.2, 2.0]))[:, None, None]

        np.testing.assert_allclose(rss_combine(rotated), rss_combine(images))

    @m.context("When cropping about the centre")
    @m.it("Returns the central window")
    def test_crop(self):
        x = np.arange(36.0).reshape(6, 6)
        assert np.array_equal(center_crop(x, (2, 4)), x[2:4, 1:5])

        with pytest.raises(ShapeError):
            center_crop(x, (8, 2))


@m.describe("Image rotation")
class TestRotation:
    @m.context("When the angle is 0")
    @m.it("Returns the input")
    def test_identity(self, rng):
        x = rng.normal(size=(8, 8))
        assert rotate_image(x, 0) is x

    @m.context("When the angle is a multiple of 90 degrees")
    @m.it("Permutes pixels exactly")
    def test_quarter_turns(self, rng):
        x = rng.normal(size=(2, 9, 9))

        assert np.array_equal(rotate_image(x, 90), np.rot90(x, axes=(1, 2)))
        assert np.array_equal(rotate_image(x, 180), x[:, ::-1, ::-1])
        assert np.array_equal(rotate_image(x, 360), x)

    @m.context("When rotating by an arbitrary angle")
    @m.it("Keeps the centre of an odd-sized image fixed")
    def test_centre(self):
        x = np.zeros((9, 9))
        x[4, 4] = 1.0
        assert rotate_image(x, 17.3)[4, 4] == 1.0
