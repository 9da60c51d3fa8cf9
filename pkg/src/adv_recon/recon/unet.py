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

from dataclasses import dataclass
from typing import Optional

import numpy as np
from structlog import get_logger

from adv_recon import autodiff as ad
from adv_recon.recon.layers import UNet
from adv_recon.recon.operator import ReconOperator, zero_filled

log = get_logger(__name__)

NORM_EPS = 1e-12


@dataclass(frozen=True)
class UNetConfig:
    top_channels: int = 8
    depth: int = 3
    crop: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if self.top_channels < 1:
            raise ValueError(f"top_channels must be >= 1, got {self.top_channels}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")


class UNetRecon(ReconOperator):
    """Image-domain de-aliasing of the zero-filled reconstruction.

    The zero-filled image is normalised by its own mean and standard deviation, a
    UNet predicts a residual correction, the result is de-normalised and its
    magnitude taken. The normalisation statistics are differentiated through.
    """

    kind = "unet"

    def __init__(self, config: UNetConfig = None, acceleration: int = None):
        config = config or UNetConfig()
        super().__init__(config, acceleration)
        rng = np.random.default_rng(config.seed)
        self.net = UNet("", 1, 1, config.top_channels, config.depth, rng, self.params)

    def forward(self, k, mask, maps, params):
        x = zero_filled(k)
        h, w = np.shape(ad._value(x))
        n = h * w

        mu = ad.reduce_sum(x) / n
        centred = x - mu
        sd = ad.sqrt(ad.reduce_sum(ad.square(centred)) / n + NORM_EPS)
        xn = centred / sd

        residual = self.net(params, ad.reshape(xn, (1, h, w)))
        y = xn + ad.reshape(residual, (h, w))

        return ad.magnitude(y * sd + mu)
