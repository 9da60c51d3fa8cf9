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
from adv_recon.mri import SamplingMask, SensitivityMaps, rss_combine
from adv_recon.recon.layers import UNet
from adv_recon.recon.operator import ReconOperator

log = get_logger(__name__)

NORM_EPS = 1e-12


@dataclass(frozen=True)
class VarNetConfig:
    cascades: int = 4
    unet_top_channels: int = 6
    unet_depth: int = 2
    dc_weight_init: float = 1.0
    crop: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if self.cascades < 0:
            raise ValueError(f"cascades must be >= 0, got {self.cascades}")
        if self.unet_top_channels < 1 or self.unet_depth < 1:
            raise ValueError(
                f"The refinement UNet requires top channels >= 1 and depth >= 1, got "
                f"{self.unet_top_channels} and {self.unet_depth}"
            )


class VarNet(ReconOperator):
    """An unrolled variational network acting on multi-coil k-space.

    Each cascade t updates the k-space estimate as

        k <- k * (1 - w_t M) + w_t M k_measured - refine_t(k)

    where M is the sampling mask, w_t a learned data-consistency weight and
    refine_t reduces k to one complex image with the conjugate sensitivity maps,
    applies a UNet to its real and imaginary channels (normalised by the image's
    RMS), and expands the result back to coil k-space. The output is the RSS
    image of the final estimate. Sensitivity maps are an input, not estimated.
    """

    kind = "varnet"

    def __init__(self, config: VarNetConfig = None, acceleration: int = None):
        config = config or VarNetConfig()
        super().__init__(config, acceleration)
        rng = np.random.default_rng(config.seed)

        self.nets = []
        for t in range(config.cascades):
            self.params[f"cascade{t}.dc_weight"] = np.asarray(config.dc_weight_init)
            self.nets.append(
                UNet(
                    f"cascade{t}.",
                    2,
                    2,
                    config.unet_top_channels,
                    config.unet_depth,
                    rng,
                    self.params,
                )
            )

    def _refine(self, t: int, k, maps: np.ndarray, params: dict):
        h, w = maps.shape[1:]
        x = ad.reduce_sum(np.conj(maps) * ad.ifft2c(k), axis=0)
        sd = ad.sqrt(ad.reduce_sum(ad.square(x)) / (h * w) + NORM_EPS)

        channels = ad.concat(
            [ad.reshape(ad.real(x), (1, h, w)), ad.reshape(ad.imag(x), (1, h, w))]
        )
        y = self.nets[t](params, channels / sd) * sd
        image = ad.to_complex(y[0], y[1])

        return ad.fft2c(maps * image)

    def unroll(self, k, mask: SamplingMask, maps: SensitivityMaps, params: dict):
        """Return the k-space estimate after all cascades."""
        if maps is None:
            raise ValueError("The variational network requires sensitivity maps")
        if mask is None:
            raise ValueError("The variational network requires the sampling mask")

        dtype = np.real(ad._value(k)).dtype
        m = mask.weights.astype(dtype)
        s = maps.maps.astype(np.result_type(dtype, np.complex64))

        measured = k
        estimate = k
        for t in range(self.config.cascades):
            wm = params[f"cascade{t}.dc_weight"] * m
            estimate = estimate * (1 - wm) + wm * measured - self._refine(
                t, estimate, s, params
            )
            log.debug("Completed cascade", cascade=t)

        return estimate

    def forward(self, k, mask: SamplingMask, maps: SensitivityMaps, params: dict):
        return rss_combine(ad.ifft2c(self.unroll(k, mask, maps, params)))
