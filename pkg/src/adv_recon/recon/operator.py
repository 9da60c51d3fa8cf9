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

import dataclasses
from typing import Optional

import numpy as np
from structlog import get_logger

from adv_recon import autodiff as ad
from adv_recon.mri import SamplingMask, SensitivityMaps, center_crop, rss_combine

log = get_logger(__name__)


class ReconOperator:
    """A differentiable map from masked multi-coil k-space to a magnitude image.

    Parameters are held as a name-ordered dict of real arrays. The forward pass
    takes the parameters explicitly, so that the same code runs with parameters
    as plain arrays (attacks, evaluation) or as tape leaves (training).
    """

    kind: str = None

    def __init__(self, config=None, acceleration: Optional[int] = None):
        self.config = config
        self.acceleration = acceleration
        self.params: dict[str, np.ndarray] = {}
        self.history: list[float] = []

    @property
    def crop(self) -> Optional[tuple]:
        crop = getattr(self.config, "crop", None)
        return None if crop is None else tuple(crop)

    def parameters(self) -> dict[str, np.ndarray]:
        return self.params

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        return list(self.params.items())

    @property
    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def forward(self, k, mask: SamplingMask, maps: SensitivityMaps, params: dict):
        raise NotImplementedError

    def __call__(
        self,
        k,
        mask: SamplingMask = None,
        maps: SensitivityMaps = None,
        params: dict = None,
    ):
        """Reconstruct an image from masked k-space.

        Args:
            k: Masked k-space of shape (N, H, W), array or Tensor.
            mask: The mask that was applied to k.
            maps: Coil sensitivity maps.
            params: Parameters to use instead of this operator's own, e.g. tape
                leaves.

        Returns:
            A real image, Tensor if k or any parameter is a Tensor.
        """
        params = self.params if params is None else params
        out = self.forward(k, mask, maps, params)
        if self.crop is not None:
            out = center_crop(out, self.crop)
        return out

    def apply(self, k: np.ndarray, mask=None, maps=None) -> np.ndarray:
        """Reconstruct an image from array k-space, returning an array."""
        return np.asarray(self(np.asarray(k), mask, maps))

    def with_parameters(self, params: dict):
        """Return a copy of this operator with different parameter values."""
        other = self.__class__.__new__(self.__class__)
        other.__dict__.update(self.__dict__)
        other.params = {name: np.asarray(params[name]) for name in self.params}
        other.history = list(self.history)
        return other

    def cast(self, dtype):
        """Return a copy of this operator with parameters of a real dtype."""
        return self.with_parameters(
            {name: p.astype(dtype) for name, p in self.params.items()}
        )

    def config_dict(self) -> dict:
        if self.config is None:
            return {}
        d = dataclasses.asdict(self.config)
        if d.get("crop") is not None:
            d["crop"] = list(d["crop"])
        return d

    def __repr__(self):
        return (
            f"{self.__class__.__name__}(config={self.config}, "
            f"acceleration={self.acceleration}, parameters={self.num_parameters})"
        )


@dataclasses.dataclass(frozen=True)
class ZeroFilledConfig:
    crop: Optional[tuple] = None


def zero_filled(k, crop: Optional[tuple] = None):
    """Return the zero-filled reconstruction: per-coil inverse FFT, RSS combination
    and an optional centre crop."""
    out = rss_combine(ad.ifft2c(k))
    if crop is not None:
        out = center_crop(out, crop)
    return out


class ZeroFilled(ReconOperator):
    """The parameter-free aliased baseline."""

    kind = "zero_filled"

    def __init__(self, config: ZeroFilledConfig = None, acceleration=None):
        super().__init__(config or ZeroFilledConfig(), acceleration)

    def forward(self, k, mask, maps, params):
        return zero_filled(k)
