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

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter
from structlog import get_logger

from adv_recon import autodiff as ad
from adv_recon.exception import ShapeError

log = get_logger(__name__)


@dataclass(frozen=True)
class MetricConfig:
    """SSIM/PSNR settings.

    The defaults are a uniform 7x7 window with k1 = 0.01 and k2 = 0.03. When
    data_range is None, the maximum of the reference image is used.
    """

    window: int = 7
    k1: float = 0.01
    k2: float = 0.03
    data_range: Optional[float] = None

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"SSIM window must be odd and >= 3, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError(f"SSIM constants must be > 0, got {self.k1}, {self.k2}")
        if self.data_range is not None and self.data_range <= 0:
            raise ValueError(f"Data range must be > 0, got {self.data_range}")


DEFAULT_METRICS = MetricConfig()


def _data_range(reference: np.ndarray, cfg: MetricConfig) -> float:
    dr = cfg.data_range if cfg.data_range is not None else float(np.max(reference))
    if dr <= 0:
        raise ValueError(f"Data range must be > 0, got {dr}")
    return dr


def _check_pair(op: str, a: np.ndarray, b: np.ndarray, window: int = None):
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(
            f"{op}: expected two 2-D images of equal shape, got {a.shape} and "
            f"{b.shape}",
            primitive=op,
            expected=a.shape,
            observed=b.shape,
        )
    if window is not None and min(a.shape) < window:
        raise ShapeError(
            f"{op}: image of shape {a.shape} is smaller than the {window}x{window} "
            f"window",
            primitive=op,
            expected=(window, window),
            observed=a.shape,
        )


def _ssim(a: np.ndarray, b: np.ndarray, data_range: float, cfg: MetricConfig) -> float:
    w = cfg.window
    cov_norm = w * w / (w * w - 1)

    ux = uniform_filter(a, size=w)
    uy = uniform_filter(b, size=w)
    uxx = uniform_filter(a * a, size=w)
    uyy = uniform_filter(b * b, size=w)
    uxy = uniform_filter(a * b, size=w)

    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)

    c1 = (cfg.k1 * data_range) ** 2
    c2 = (cfg.k2 * data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / (
        (ux**2 + uy**2 + c1) * (vx + vy + c2)
    )

    # Only windows lying entirely inside the image contribute
    pad = (w - 1) // 2
    return float(s[pad:-pad, pad:-pad].mean())


def ssim(a: np.ndarray, b: np.ndarray, cfg: MetricConfig = DEFAULT_METRICS) -> float:
    """Return the mean local SSIM of two images.

    Args:
        a: The reference image; its maximum is the data range unless cfg fixes one.
        b: The image to compare.
        cfg: Metric settings.

    Returns:
        SSIM in [-1, 1].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair("ssim", a, b, cfg.window)

    return _ssim(a, b, _data_range(a, cfg), cfg)


def bounding_box(region) -> tuple[slice, slice]:
    """Return the row and column slices of the tight bounding box of a region.

    Args:
        region: A boolean mask, or an object with a boolean mask attribute.
    """
    mask = np.asarray(getattr(region, "mask", region), dtype=bool)
    if not mask.any():
        raise ValueError("The region is empty")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))

    return slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1)


def region_ssim(a: np.ndarray, b: np.ndarray, region, cfg=DEFAULT_METRICS) -> float:
    """Return the SSIM of two images over the tight bounding box of a region.

    The data range is taken from the whole reference image (or cfg), not from the
    box, so the region and whole-image values are on the same scale.

    Args:
        a: The reference image.
        b: The image to compare.
        region: A boolean mask of a's shape, or an object with a mask attribute.
        cfg: Metric settings.

    Returns:
        SSIM in [-1, 1].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair("region_ssim", a, b)

    mask = np.asarray(getattr(region, "mask", region), dtype=bool)
    if mask.shape != a.shape:
        raise ShapeError(
            f"Region shape {mask.shape} does not match image shape {a.shape}",
            primitive="region_ssim",
            expected=a.shape,
            observed=mask.shape,
        )
    rows, cols = bounding_box(mask)
    height, width = rows.stop - rows.start, cols.stop - cols.start
    if height < cfg.window or width < cfg.window:
        raise ValueError(
            f"Region bounding box {height}x{width} is smaller than the "
            f"{cfg.window}x{cfg.window} SSIM window"
        )

    return _ssim(a[rows, cols], b[rows, cols], _data_range(a, cfg), cfg)


def psnr(a: np.ndarray, b: np.ndarray, cfg: MetricConfig = DEFAULT_METRICS) -> float:
    """Return the peak signal-to-noise ratio in dB, or math.inf for identical
    images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair("psnr", a, b)

    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10 * math.log10(_data_range(a, cfg) ** 2 / mse)


def ssim_loss(x, reference: np.ndarray, cfg: MetricConfig = DEFAULT_METRICS):
    """Return 1 - SSIM(reference, x) as a differentiable function of x.

    Local statistics are computed with a uniform convolution and only windows lying
    entirely inside the image are averaged, which gives the same value as ssim.

    Args:
        x: A real image of shape (H, W), Tensor or array.
        reference: The reference image.
        cfg: Metric settings.
    """
    reference = np.asarray(reference, dtype=np.float64)
    _check_pair("ssim_loss", reference, np.asarray(ad._value(x)), cfg.window)

    h, w = reference.shape
    win = cfg.window
    pad = (win - 1) // 2
    kernel = np.full((1, 1, win, win), 1 / (win * win))
    cov_norm = win * win / (win * win - 1)
    interior = (0, slice(pad, h - pad), slice(pad, w - pad))

    def box_mean(v):
        return ad.getitem(ad.conv2d(ad.reshape(v, (1, h, w)), kernel), interior)

    ux = box_mean(x)
    uy = box_mean(reference)
    vx = cov_norm * (box_mean(x * x) - ux * ux)
    vy = cov_norm * (box_mean(reference * reference) - uy * uy)
    vxy = cov_norm * (box_mean(x * reference) - ux * uy)

    dr = _data_range(reference, cfg)
    c1 = (cfg.k1 * dr) ** 2
    c2 = (cfg.k2 * dr) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / (
        (ux * ux + uy * uy + c1) * (vx + vy + c2)
    )
    count = (h - 2 * pad) * (w - 2 * pad)

    return 1 - ad.reduce_sum(s) / count
