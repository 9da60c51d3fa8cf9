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
from scipy import ndimage

from adv_recon import autodiff as ad
from adv_recon.exception import NumericalError, ShapeError

GRAD_TOLERANCE = 1e-6


def check_gradient(fn, *arrays, tolerance=GRAD_TOLERANCE):
    """Compare the tape gradient of fn with central finite differences, argument by
    argument."""
    _, grads = ad.value_and_grad(fn, *arrays)

    for i, (x, g) in enumerate(zip(arrays, grads)):

        def partial(v, i=i):
            args = list(arrays)
            args[i] = v
            return fn(*args)

        expected = ad.numerical_gradient(partial, x)
        assert g.shape == np.shape(x)
        assert ad.relative_error(g, expected) < tolerance


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@m.describe("Tape")
class TestTape:
    @m.context("When a scalar loss is differentiated")
    @m.it("Returns a gradient for every leaf, in the leaf's shape and dtype")
    def test_backward_shapes(self, rng):
        tape = ad.Tape()
        x = tape.leaf(rng.normal(size=(3, 4)), name="x")
        z = tape.leaf(crandn(rng, 3, 4), name="z")
        unused = tape.leaf(np.ones(5), name="unused")

        loss = ad.reduce_sum(ad.square(x * z))
        grads = tape.backward(loss)

        assert grads[x.id].shape == (3, 4)
        assert grads[x.id].dtype == np.float64
        assert grads[z.id].dtype == np.complex128
        assert np.array_equal(grads[unused.id], np.zeros(5))

    @m.context("When a tensor is used more than once")
    @m.it("Accumulates its gradient over every use")
    def test_accumulation(self, rng):
        x0 = rng.normal(size=6)
        _, (g,) = ad.value_and_grad(lambda x: ad.reduce_sum(x * x + x), x0)

        np.testing.assert_allclose(g, 2 * x0 + 1, rtol=1e-12)

    @m.context("When the loss is not a scalar")
    @m.it("Raises a ShapeError")
    def test_non_scalar_loss(self):
        tape = ad.Tape()
        x = tape.leaf(np.ones(3))

        with pytest.raises(ShapeError) as info:
            tape.backward(x * 2.0)
        assert info.value.primitive == "backward"

    @m.context("When the loss is complex")
    @m.it("Raises a TypeError")
    def test_complex_loss(self):
        tape = ad.Tape()
        z = tape.leaf(np.ones(3, dtype=np.complex128))

        with pytest.raises(TypeError):
            tape.backward(ad.reduce_sum(z))

    @m.context("When tensors of two tapes are combined")
    @m.it("Raises a ValueError")
    def test_mixed_tapes(self):
        a = ad.Tape().leaf(np.ones(2))
        b = ad.Tape().leaf(np.ones(2))

        with pytest.raises(ValueError, match="different tapes"):
            a + b

    @m.context("When a leaf holds non-finite values")
    @m.it("Raises a NumericalError")
    def test_non_finite_leaf(self):
        with pytest.raises(NumericalError):
            ad.Tape().leaf(np.array([1.0, np.nan]), name="bad")

    @m.context("When a leaf is created from integers")
    @m.it("Promotes it to float64")
    def test_integer_leaf(self):
        x = ad.Tape().leaf(np.arange(3))
        assert x.dtype == np.float64

    @m.context("When a constant takes part in a computation")
    @m.it("Receives no gradient")
    def test_constant(self, rng):
        tape = ad.Tape()
        x = tape.leaf(rng.normal(size=4))
        c = tape.constant(rng.normal(size=4))
        grads = tape.backward(ad.reduce_sum(x * c))

        assert set(grads) == {x.id}
        np.testing.assert_array_equal(grads[x.id], c.value)

    @m.context("When primitives are applied to plain arrays")
    @m.it("Returns plain arrays and records nothing")
    def test_untaped(self, rng):
        x = rng.normal(size=(4, 4))
        y = ad.reduce_sum(ad.square(ad.fft2c(x)))

        assert not isinstance(y, ad.Tensor)
        np.testing.assert_allclose(y, np.sum(x * x), rtol=1e-12)

    @m.context("When a primitive is applied by name")
    @m.it("Dispatches through the registry")
    def test_record_op(self, rng):
        tape = ad.Tape()
        x = tape.leaf(rng.normal(size=(2, 4, 4)))
        y = ad.record_op("leaky_relu", x, slope=0.2)

        assert isinstance(y, ad.Tensor)
        assert tape.nodes[-1].op == "leaky_relu"

        with pytest.raises(ValueError, match="Unknown primitive"):
            ad.record_op("no_such_op", x)


@m.describe("Elementwise primitives")
class TestElementwise:
    @m.context("When a real loss depends on a complex product")
    @m.it("Reports dL/dRe + i dL/dIm")
    def test_complex_convention(self, rng):
        c = crandn(rng, 5)
        z0 = crandn(rng, 5)
        _, (g,) = ad.value_and_grad(lambda z: ad.reduce_sum(ad.real(z * c)), z0)

        np.testing.assert_allclose(g, np.conj(c), rtol=1e-12)

    @m.context("When the squared magnitude is differentiated")
    @m.it("Has gradient 2z")
    def test_square(self, rng):
        z0 = crandn(rng, 3, 3)
        _, (g,) = ad.value_and_grad(lambda z: ad.reduce_sum(ad.square(z)), z0)

        np.testing.assert_allclose(g, 2 * z0, rtol=1e-12)

    @m.context("When binary operations broadcast")
    @m.it("Matches finite differences for each operand")
    def test_binary_broadcast(self, rng):
        a = crandn(rng, 3, 4)
        b = crandn(rng, 1, 4) + 3.0
        w = rng.normal(size=(3, 4))

        for fn in (
            lambda a, b: ad.reduce_sum(ad.square(a + b) * w),
            lambda a, b: ad.reduce_sum(ad.square(a - b) * w),
            lambda a, b: ad.reduce_sum(ad.square(a * b) * w),
            lambda a, b: ad.reduce_sum(ad.square(a / b) * w),
        ):
            check_gradient(fn, a, b)

    @m.context("When magnitude, sqrt and the real/imaginary split are composed")
    @m.it("Matches finite differences")
    def test_unary(self, rng):
        z = crandn(rng, 4, 4)
        w = rng.normal(size=(4, 4))

        check_gradient(lambda z: ad.reduce_sum(ad.magnitude(z) * w), z)
        check_gradient(lambda z: ad.reduce_sum(ad.sqrt(ad.square(z) + 1.0) * w), z)
        check_gradient(
            lambda z: ad.reduce_sum(ad.real(z) * ad.imag(ad.conj(z)) * w), z
        )
        check_gradient(
            lambda re, im: ad.reduce_sum(ad.square(ad.to_complex(re, im) * z)),
            rng.normal(size=(4, 4)),
            rng.normal(size=(4, 4)),
        )

    @m.context("When magnitude and sqrt are differentiated at zero")
    @m.it("Propagates a zero subgradient")
    def test_zero_subgradient(self):
        _, (g,) = ad.value_and_grad(
            lambda z: ad.reduce_sum(ad.magnitude(z)), np.zeros(3, dtype=np.complex128)
        )
        assert np.array_equal(g, np.zeros(3))

        _, (g,) = ad.value_and_grad(lambda x: ad.reduce_sum(ad.sqrt(x)), np.zeros(3))
        assert np.array_equal(g, np.zeros(3))

    @m.context("When a leaky ReLU is differentiated away from zero")
    @m.it("Matches finite differences")
    def test_leaky_relu(self, rng):
        x = rng.normal(size=(2, 5, 5))
        x[np.abs(x) < 1e-3] = 0.5
        check_gradient(lambda x: ad.reduce_sum(ad.square(ad.leaky_relu(x, 0.2))), x)

    @m.context("When shapes cannot be broadcast")
    @m.it("Raises a ShapeError naming the primitive")
    def test_broadcast_error(self):
        with pytest.raises(ShapeError) as info:
            ad.add(np.ones((2, 3)), np.ones((4, 3)))
        assert info.value.primitive == "add"


@m.describe("Reductions and shape primitives")
class TestShape:
    @m.context("When sums, masked sums and reshapes are composed")
    @m.it("Matches finite differences")
    def test_reductions(self, rng):
        mask = rng.random((4, 5)) > 0.5
        w = rng.normal(size=4)

        check_gradient(
            lambda z: ad.reduce_sum(ad.square(ad.reduce_sum(z, axis=1)) * w),
            crandn(rng, 4, 5),
        )
        check_gradient(
            lambda z: ad.masked_sum(ad.square(z), mask.astype(float)),
            crandn(rng, 4, 5),
        )
        check_gradient(
            lambda x: ad.reduce_sum(ad.square(ad.reshape(x, (5, 4))[1:3])),
            rng.normal(size=(4, 5)),
        )

    @m.context("When a tensor is zero-padded")
    @m.it("Places it at the given offset and matches finite differences")
    def test_pad2(self, rng):
        x = crandn(rng, 2, 3, 4)
        out = ad.pad2(x, (1, 0), (2, 3))

        assert out.shape == (2, 6, 7)
        assert np.array_equal(out[:, 1:4, 0:4], x)
        assert np.sum(np.abs(out)) == pytest.approx(np.sum(np.abs(x)))

        w = rng.normal(size=(6, 7))
        check_gradient(
            lambda z: ad.reduce_sum(ad.square(ad.pad2(z, (1, 0), (2, 3))) * w), x
        )

    @m.context("When tensors are concatenated and indexed")
    @m.it("Matches finite differences")
    def test_concat_getitem(self, rng):
        w = rng.normal(size=(5, 3))

        def fn(a, b):
            c = ad.concat([a, b], axis=0)
            return ad.reduce_sum(ad.square(c[np.array([0, 2, 2, 4])]) * w[:4])

        check_gradient(fn, rng.normal(size=(2, 3)), rng.normal(size=(3, 3)))

    @m.context("When repeated advanced indices select the same element")
    @m.it("Accumulates the gradient")
    def test_getitem_repeated(self):
        _, (g,) = ad.value_and_grad(
            lambda x: ad.reduce_sum(x[np.array([1, 1, 1])]), np.zeros(3)
        )
        np.testing.assert_array_equal(g, [0.0, 3.0, 0.0])

    @m.context("When pooling and upsampling are differentiated")
    @m.it("Matches finite differences")
    def test_pool_upsample(self, rng):
        w = rng.normal(size=(2, 4, 6))
        check_gradient(
            lambda x: ad.reduce_sum(ad.upsample2(ad.avg_pool2(x)) * w),
            rng.normal(size=(2, 4, 6)),
        )

    @m.context("When average pooling an odd-sized image")
    @m.it("Raises a ShapeError")
    def test_pool_odd(self):
        with pytest.raises(ShapeError):
            ad.avg_pool2(np.ones((1, 5, 4)))


@m.describe("Convolution")
class TestConvolution:
    @m.context("When a multi-channel convolution is evaluated")
    @m.it("Matches a zero-padded cross-correlation")
    def test_forward(self, rng):
        x = rng.normal(size=(2, 6, 7))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)

        out = ad.conv2d(x, w, b)
        expected = np.stack(
            [
                sum(ndimage.correlate(x[c], w[o, c], mode="constant") for c in range(2))
                + b[o]
                for o in range(3)
            ]
        )
        np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-12)

    @m.context("When a convolution is differentiated")
    @m.it("Matches finite differences for input, kernel and bias")
    def test_gradient(self, rng):
        t = rng.normal(size=(3, 5, 5))
        check_gradient(
            lambda x, w, b: ad.reduce_sum(ad.square(ad.conv2d(x, w, b) - t)),
            rng.normal(size=(2, 5, 5)),
            rng.normal(size=(3, 2, 3, 3)),
            rng.normal(size=3),
        )

    @m.context("When kernel and input channels disagree")
    @m.it("Raises a ShapeError")
    def test_channel_mismatch(self):
        with pytest.raises(ShapeError) as info:
            ad.conv2d(np.ones((2, 5, 5)), np.ones((1, 3, 3, 3)))
        assert info.value.primitive == "conv2d"

    @m.context("When given complex input")
    @m.it("Raises a TypeError")
    def test_complex_input(self):
        with pytest.raises(TypeError):
            ad.conv2d(np.ones((1, 5, 5), dtype=complex), np.ones((1, 1, 3, 3)))


@m.describe("Bilinear resampling")
class TestBilinear:
    @m.context("When a grid resamples an image")
    @m.it("Has the transposed matrix as its adjoint")
    def test_adjoint(self, rng):
        grid = ad.ResampleGrid(
            (6, 7), rng.uniform(-1, 6, (5, 4)), rng.uniform(-1, 7, (5, 4))
        )
        x = crandn(rng, 2, 6, 7)
        y = crandn(rng, 2, 5, 4)

        lhs = np.vdot(grid.apply(x), y)
        rhs = np.vdot(x, grid.adjoint(y))
        assert abs(lhs - rhs) < 1e-10 * abs(lhs)

    @m.context("When sampling at integer coordinates")
    @m.it("Copies pixels exactly and reads zeros outside the image")
    def test_integer_coordinates(self, rng):
        x = rng.normal(size=(4, 4))
        ys = np.array([[0.0, 3.0, -1.0]])
        xs = np.array([[2.0, 0.0, 0.0]])
        out = ad.bilinear(x, ad.ResampleGrid((4, 4), ys, xs))

        assert out[0, 0] == x[0, 2]
        assert out[0, 1] == x[3, 0]
        assert out[0, 2] == 0

    @m.context("When resampling is differentiated")
    @m.it("Matches finite differences")
    def test_gradient(self, rng):
        grid = ad.ResampleGrid(
            (5, 5), rng.uniform(0, 4, (5, 5)), rng.uniform(0, 4, (5, 5))
        )
        check_gradient(
            lambda z: ad.reduce_sum(ad.square(ad.bilinear(z, grid))), crandn(rng, 5, 5)
        )

    @m.context("When resampling single precision data")
    @m.it("Keeps single precision in both directions")
    def test_single_precision(self, rng):
        grid = ad.ResampleGrid(
            (6, 7), rng.uniform(-1, 6, (5, 4)), rng.uniform(-1, 7, (5, 4))
        )
        x = crandn(rng, 2, 6, 7).astype(np.complex64)

        assert grid.apply(x).dtype == np.complex64
        assert grid.apply(x.real).dtype == np.float32
        assert grid.adjoint(grid.apply(x)).dtype == np.complex64


@m.describe("Centered FFT")
class TestFFT:
    @m.context("When transforming a constant image")
    @m.it("Places the zero frequency at (H // 2, W // 2)")
    @pytest.mark.parametrize("shape", [(4, 6), (5, 7)])
    def test_zero_frequency(self, shape):
        k = ad.fft2c(np.ones(shape))
        h, w = shape

        assert abs(k[h // 2, w // 2] - np.sqrt(h * w)) < 1e-10
        k[h // 2, w // 2] = 0
        assert np.max(np.abs(k)) < 1e-10

    @m.context("When transforming and inverting")
    @m.it("Is unitary and invertible for even and odd sizes")
    @pytest.mark.parametrize("shape", [(2, 8, 8), (3, 5, 7)])
    def test_unitary(self, rng, shape):
        x = crandn(rng, *shape)
        k = ad.fft2c(x)

        assert abs(np.linalg.norm(k) - np.linalg.norm(x)) < 1e-10 * np.linalg.norm(x)
        assert ad.relative_error(ad.ifft2c(k), x) < 1e-12

    @m.context("When a loss through the FFT is differentiated")
    @m.it("Matches finite differences")
    def test_gradient(self, rng):
        w = rng.normal(size=(5, 6))
        check_gradient(
            lambda z: ad.reduce_sum(ad.square(ad.ifft2c(ad.fft2c(z) * w))),
            crandn(rng, 5, 6),
        )

    @m.context("When compared with a direct DFT matrix on a 3x5 grid")
    @m.it("Matches the centred orthonormal transform and its inverse")
    def test_dft_matrix(self, rng):
        def centred_dft(n):
            idx = np.arange(n) - n // 2
            return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)

        x = crandn(rng, 3, 5)
        fh, fw = centred_dft(3), centred_dft(5)
        expected = fh @ x @ fw.T

        assert np.max(np.abs(ad.fft2c(x) - expected)) < 1e-10
        inverse = fh.conj() @ x @ fw.conj().T
        assert np.max(np.abs(ad.ifft2c(x) - inverse)) < 1e-10

    @m.context("When transforming single precision data")
    @m.it("Keeps single precision")
    def test_single_precision(self, rng):
        x = crandn(rng, 2, 8, 8).astype(np.complex64)

        assert ad.fft2c(x).dtype == np.complex64
        assert ad.ifft2c(x).dtype == np.complex64
        assert ad.fft2c(x.real).dtype == np.complex64
        assert ad.fft2c(x.astype(np.complex128)).dtype == np.complex128
