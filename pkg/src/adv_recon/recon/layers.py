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

"""Convolutional building blocks shared by the learned reconstruction operators."""

import numpy as np

from adv_recon import autodiff as ad

LEAKY_SLOPE = 0.2


def init_conv(
    params: dict,
    name: str,
    c_in: int,
    c_out: int,
    size: int,
    rng: np.random.Generator,
    zero: bool = False,
):
    """Add the weight and bias of a convolution to params.

    Weights are He-normal initialised, or zero if zero is true. Biases are zero.
    """
    shape = (c_out, c_in, size, size)
    if zero:
        weight = np.zeros(shape)
    else:
        weight = rng.normal(0.0, np.sqrt(2.0 / (c_in * size * size)), shape)
    params[f"{name}.weight"] = weight
    params[f"{name}.bias"] = np.zeros(c_out)


def conv(params: dict, name: str, x):
    return ad.conv2d(x, params[f"{name}.weight"], params[f"{name}.bias"])


class UNet:
    """A UNet mapping (C_in, H, W) to (C_out, H, W).

    Each level is two 3x3 convolutions with leaky ReLU. The encoder downsamples by
    2x2 average pooling, doubling the channel count per level; the decoder upsamples
    by nearest neighbour, applies a 3x3 convolution and concatenates the skip
    connection. A final 1x1 convolution is zero-initialised, so an untrained network
    outputs exactly zero. Inputs whose sides are not divisible by 2 ** (depth - 1)
    are zero-padded and the output is cropped back.
    """

    def __init__(
        self,
        prefix: str,
        c_in: int,
        c_out: int,
        top_channels: int,
        depth: int,
        rng: np.random.Generator,
        params: dict,
    ):
        if top_channels < 1 or depth < 1:
            raise ValueError(
                f"UNet requires top_channels >= 1 and depth >= 1, got "
                f"{top_channels} and {depth}"
            )
        self.prefix = prefix
        self.depth = depth
        self.channels = [top_channels * 2**level for level in range(depth)]

        prev = c_in
        for level, ch in enumerate(self.channels):
            self._init_block(params, f"{prefix}enc{level}", prev, ch, rng)
            prev = ch
        for level in reversed(range(depth - 1)):
            ch = self.channels[level]
            init_conv(
                params, f"{prefix}up{level}", self.channels[level + 1], ch, 3, rng
            )
            self._init_block(params, f"{prefix}dec{level}", 2 * ch, ch, rng)
        init_conv(params, f"{prefix}out", self.channels[0], c_out, 1, rng, zero=True)

    @staticmethod
    def _init_block(params, name, c_in, c_out, rng):
        init_conv(params, f"{name}.conv1", c_in, c_out, 3, rng)
        init_conv(params, f"{name}.conv2", c_out, c_out, 3, rng)

    @staticmethod
    def _block(params, name, x):
        x = ad.leaky_relu(conv(params, f"{name}.conv1", x), LEAKY_SLOPE)
        return ad.leaky_relu(conv(params, f"{name}.conv2", x), LEAKY_SLOPE)

    def padding(self, shape: tuple) -> tuple[tuple, tuple]:
        """Return the (top, left) and (bottom, right) zero padding that makes the
        spatial dimensions divisible by 2 ** (depth - 1)."""
        factor = 2 ** (self.depth - 1)
        h, w = shape[-2:]
        ph, pw = -h % factor, -w % factor
        return (ph // 2, pw // 2), (ph - ph // 2, pw - pw // 2)

    def __call__(self, params: dict, x):
        h, w = np.shape(ad._value(x))[-2:]
        before, after = self.padding((h, w))
        padded = before != (0, 0) or after != (0, 0)
        if padded:
            x = ad.pad2(x, before, after)
        p = self.prefix

        skips = []
        for level in range(self.depth):
            if level > 0:
                x = ad.avg_pool2(x)
            x = self._block(params, f"{p}enc{level}", x)
            skips.append(x)

        for level in reversed(range(self.depth - 1)):
            x = ad.upsample2(x)
            x = ad.leaky_relu(conv(params, f"{p}up{level}", x), LEAKY_SLOPE)
            x = ad.concat([x, skips[level]], axis=0)
            x = self._block(params, f"{p}dec{level}", x)

        out = conv(params, f"{p}out", x)
        if padded:
            top, left = before
            out = ad.getitem(
                out, (slice(None), slice(top, top + h), slice(left, left + w))
            )
        return out
