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

"""The multi-coil Cartesian acquisition model.

k-space data are complex arrays of shape (N, H, W): N coils, H rows (phase
encoding lines run along the W axis and are selected column-wise by a mask), W
columns. Image-domain arrays are (H, W) or (N, H, W). Functions that are part of a
reconstruction or attack pipeline accept either arrays or autodiff Tensors.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats
from structlog import get_logger

from adv_recon import autodiff as ad
from adv_recon.exception import ShapeError

log = get_logger(__name__)

DEFAULT_CENTER_FRACTIONS = {4: 0.08, 8: 0.04}
"""Fully sampled central fraction of columns, by acceleration factor."""

RSS_TOLERANCE = 1e-6


def default_center_fraction(acceleration: int) -> float:
    try:
        return DEFAULT_CENTER_FRACTIONS[acceleration]
    except KeyError:
        raise ValueError(
            f"No default center fraction for acceleration {acceleration}; "
            f"supported: {sorted(DEFAULT_CENTER_FRACTIONS)}"
        )


@dataclass(frozen=True, eq=False)
class SensitivityMaps:
    """Complex coil sensitivity maps of shape (N, H, W), RSS-normalised to 1 inside
    their support and 0 outside it."""

    maps: np.ndarray
    support: np.ndarray = field(default=None)

    def __post_init__(self):
        maps = np.asarray(self.maps)
        if maps.ndim != 3 or maps.shape[0] < 1:
            raise ShapeError(
                f"Sensitivity maps must have shape (N, H, W), got {maps.shape}",
                primitive="SensitivityMaps",
                observed=maps.shape,
            )
        support = self.support
        if support is None:
            support = np.ones(maps.shape[1:], dtype=bool)
        support = np.asarray(support, dtype=bool)
        if support.shape != maps.shape[1:]:
            raise ShapeError(
                f"Support shape {support.shape} does not match maps {maps.shape}",
                primitive="SensitivityMaps",
                expected=maps.shape[1:],
                observed=support.shape,
            )
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "support", support)

    @classmethod
    def normalise(cls, maps: np.ndarray, support: np.ndarray = None):
        """Return maps scaled voxelwise so that their RSS is 1 inside support and
        zero outside it. Voxels where all coils are zero are excluded from the
        support."""
        maps = np.asarray(maps)
        rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
        if support is None:
            support = np.ones(rss.shape, dtype=bool)
        support = np.asarray(support, dtype=bool) & (rss > 0)
        scale = np.where(support, 1 / np.where(rss > 0, rss, 1), 0)

        return cls(maps * scale, support)

    def astype(self, dtype):
        """Return a copy with maps of the complex dtype matching a real dtype."""
        return SensitivityMaps(
            self.maps.astype(np.result_type(dtype, np.complex64)), self.support
        )

    @property
    def num_coils(self) -> int:
        return self.maps.shape[0]

    @property
    def shape(self) -> tuple:
        return self.maps.shape[1:]

    def rss_deviation(self) -> float:
        """Return the largest deviation of the voxelwise RSS from its nominal value
        (1 inside the support, 0 outside)."""
        rss = np.sqrt(np.sum(np.abs(self.maps) ** 2, axis=0))
        return float(np.max(np.abs(rss - self.support)))


@dataclass(frozen=True)
class SamplingMask:
    """A Cartesian column mask, applied uniformly down each column of every coil."""

    columns: np.ndarray
    acceleration: float
    center_fraction: float
    seed: int = 0

    def __post_init__(self):
        cols = np.asarray(self.columns)
        if cols.ndim != 1:
            raise ShapeError(
                f"Mask columns must be 1-D, got shape {cols.shape}",
                primitive="SamplingMask",
                observed=cols.shape,
            )
        if not np.all((cols == 0) | (cols == 1)):
            raise ValueError("Mask columns must be 0 or 1")
        object.__setattr__(self, "columns", cols.astype(bool))

    @classmethod
    def full(cls, width: int):
        """Return a mask sampling every column."""
        return cls(np.ones(width, dtype=bool), 1, 1.0)

    @property
    def width(self) -> int:
        return self.columns.size

    @property
    def num_sampled(self) -> int:
        return int(np.count_nonzero(self.columns))

    @property
    def weights(self) -> np.ndarray:
        """The mask as a float array of 0s and 1s, broadcastable over (N, H, W)."""
        return self.columns.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, SamplingMask):
            return False
        return (
            np.array_equal(self.columns, other.columns)
            and self.acceleration == other.acceleration
            and self.center_fraction == other.center_fraction
            and self.seed == other.seed
        )

    def __hash__(self):
        return hash((self.columns.tobytes(), self.acceleration, self.seed))


@dataclass(frozen=True)
class NoiseModel:
    """Additive complex Gaussian noise with standard deviation sigma in each of the
    real and imaginary components of every k-space sample."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"Noise sigma must be >= 0, got {self.sigma}")


def _check_kspace(op: str, k):
    shape = np.shape(ad._value(k))
    if len(shape) != 3 or shape[0] < 1:
        raise ShapeError(
            f"{op}: expected k-space of shape (N, H, W), got {shape}",
            primitive=op,
            observed=shape,
        )
    return shape


def synthesize_kspace(image: np.ndarray, maps: SensitivityMaps) -> np.ndarray:
    """Return the fully sampled multi-coil k-space of an image.

    Args:
        image: A real image of shape (H, W).
        maps: Sensitivity maps of the same spatial shape.

    Returns:
        Complex k-space of shape (N, H, W), k_i = fft2c(maps_i * image).
    """
    image = np.asarray(image)
    if image.shape != maps.shape:
        raise ShapeError(
            f"Image shape {image.shape} does not match sensitivity maps {maps.shape}",
            primitive="synthesize_kspace",
            expected=maps.shape,
            observed=image.shape,
        )
    return ad.fft2c(maps.maps * image)


def coil_images(k):
    """Return per-coil images ifft2c(k_i)."""
    _check_kspace("coil_images", k)
    return ad.ifft2c(k)


def coil_norms(k: np.ndarray) -> np.ndarray:
    """Return the L2 norm of each coil's k-space, shape (N,)."""
    k = np.asarray(k)
    return np.sqrt(np.sum(np.abs(k) ** 2, axis=(-2, -1)))


def apply_mask(k, mask: SamplingMask):
    """Zero every unsampled column of every coil. Sampled entries are unchanged."""
    shape = _check_kspace("apply_mask", k)
    if shape[-1] != mask.width:
        raise ShapeError(
            f"Mask width {mask.width} does not match k-space width {shape[-1]}",
            primitive="apply_mask",
            expected=shape[-1],
            observed=mask.width,
        )
    if isinstance(k, ad.Tensor):
        return ad.mul(k, mask.weights.astype(np.finfo(k.dtype).dtype))
    return np.where(mask.columns, k, 0)


def make_cartesian_mask(
    width: int,
    acceleration: int,
    center_fraction: float = None,
    seed: int = 0,
    random: bool = False,
) -> SamplingMask:
    """Return a Cartesian undersampling mask.

    The floor(center_fraction * width) central columns are always sampled. The
    remaining columns, up to a total of round(width / acceleration), are chosen
    equispaced among the non-central columns with a seeded offset or, if random is
    true, uniformly at random without replacement.

    Args:
        width: Number of k-space columns, >= 8.
        acceleration: The acceleration factor R.
        center_fraction: Fraction of fully sampled central columns. Defaults to
            0.08 for R=4 and 0.04 for R=8.
        seed: Seed of the column selection.
        random: Select the non-central columns randomly.

    Returns:
        SamplingMask
    """
    if center_fraction is None:
        center_fraction = default_center_fraction(acceleration)
    if width < 8:
        raise ValueError(f"Mask width must be >= 8, got {width}")
    if acceleration < 1:
        raise ValueError(f"Acceleration must be >= 1, got {acceleration}")
    if not 0 < center_fraction < 1:
        raise ValueError(f"Center fraction must be in (0, 1), got {center_fraction}")

    num_center = int(np.floor(center_fraction * width))
    if num_center < 1:
        raise ValueError(
            f"Center fraction {center_fraction} selects no columns of {width}"
        )
    quota = int(np.floor(width / acceleration + 0.5))
    if num_center > quota:
        raise ValueError(
            f"Infeasible mask: {num_center} center columns exceed the quota of "
            f"{quota} columns for width {width} at acceleration {acceleration}"
        )

    columns = np.zeros(width, dtype=bool)
    pad = (width - num_center + 1) // 2
    columns[pad : pad + num_center] = True

    remaining = quota - num_center
    if remaining > 0:
        rng = np.random.default_rng(seed)
        candidates = np.flatnonzero(~columns)
        if random:
            chosen = rng.choice(candidates, size=remaining, replace=False)
        else:
            spacing = candidates.size / remaining
            offset = rng.uniform(0, spacing)
            chosen = candidates[
                np.floor(offset + np.arange(remaining) * spacing).astype(int)
            ]
        columns[chosen] = True

    log.debug(
        "Created mask",
        width=width,
        acceleration=acceleration,
        center=num_center,
        sampled=quota,
        seed=seed,
    )
    return SamplingMask(columns, acceleration, center_fraction, seed)


def add_thermal_noise(k: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Return k plus independent complex Gaussian noise, deterministic per seed."""
    k = np.asarray(k)
    if noise.sigma == 0:
        return k

    rng = np.random.default_rng(noise.seed)
    z = rng.normal(0, noise.sigma, k.shape) + 1j * rng.normal(0, noise.sigma, k.shape)
    return k + z


def rss_combine(images):
    """Combine coil images into one magnitude image by voxelwise root-sum-of-squares.

    Args:
        images: Coil images of shape (N, H, W), array or Tensor.

    Returns:
        A real nonnegative image of shape (H, W).
    """
    _check_kspace("rss_combine", images)
    return ad.sqrt(ad.reduce_sum(ad.square(images), axis=0))


def center_crop(x, shape: tuple):
    """Crop the last two axes of x to shape about their centre."""
    h, w = np.shape(ad._value(x))[-2:]
    ch, cw = shape
    if ch > h or cw > w:
        raise ShapeError(
            f"Cannot crop {h}x{w} to {ch}x{cw}",
            primitive="center_crop",
            expected=shape,
            observed=(h, w),
        )
    if (ch, cw) == (h, w):
        return x
    top, left = (h - ch) // 2, (w - cw) // 2
    return ad.getitem(x, (..., slice(top, top + ch), slice(left, left + cw)))


def estimate_background_noise(
    image: np.ndarray, background_mask: np.ndarray, num_coils: int = 1
) -> float:
    """Estimate the per-component k-space noise sigma from background voxels of an
    RSS image.

    With a unitary FFT, noise of standard deviation sigma per real/imaginary
    component in k-space has the same distribution in the image domain. In a
    signal-free voxel the RSS of N coils is then sigma times a chi-distributed
    variable with 2N degrees of freedom (Rayleigh for N = 1). The estimate is the
    background median divided by the median of that chi distribution, which for one
    coil is sqrt(2 ln 2) ~= 1.1774.

    Args:
        image: A fully sampled RSS magnitude image.
        background_mask: Boolean mask of signal-free voxels.
        num_coils: Number of coils combined into image.

    Returns:
        The sigma estimate.
    """
    image = np.asarray(image)
    background_mask = np.asarray(background_mask, dtype=bool)
    if background_mask.shape != image.shape:
        raise ShapeError(
            f"Background mask shape {background_mask.shape} does not match image "
            f"shape {image.shape}",
            primitive="estimate_background_noise",
            expected=image.shape,
            observed=background_mask.shape,
        )
    if not background_mask.any():
        raise ValueError("The background mask is empty")

    correction = stats.chi(2 * num_coils).median()
    return float(np.median(image[background_mask]) / correction)


def thermal_noise_comparability(k: np.ndarray, eta: float) -> np.ndarray:
    """Express the per-coil adversarial budget eta * |k_i| as the per-component
    sigma of complex Gaussian noise having the same expected norm.

    A complex Gaussian field of n samples with sigma per component has expected
    squared norm 2 n sigma^2, so the equivalent sigma is eta |k_i| / sqrt(2 n).

    Returns:
        Array of shape (N,).
    """
    shape = _check_kspace("thermal_noise_comparability", k)
    n = shape[-2] * shape[-1]
    return eta * coil_norms(k) / np.sqrt(2 * n)


def simulate_sensitivity_maps(
    shape: tuple, num_coils: int, seed: int = 0, support: np.ndarray = None
) -> SensitivityMaps:
    """Simulate smooth complex coil sensitivities.

    Each coil has a Gaussian-bump magnitude centred on a ring around the field of
    view and a small random linear phase ramp. The maps are then RSS-normalised.

    Args:
        shape: (H, W).
        num_coils: Number of coils, >= 1.
        seed: Seed for the ring offset and phase ramps.
        support: Optional boolean support; the full grid by default.

    Returns:
        SensitivityMaps
    """
    if num_coils < 1:
        raise ValueError(f"The number of coils must be >= 1, got {num_coils}")

    h, w = shape
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.arange(h) - (h - 1) / 2, np.arange(w) - (w - 1) / 2, indexing="ij"
    )
    radius = 0.5 * max(h, w)
    width = 0.6 * max(h, w)
    start = rng.uniform(0, 2 * np.pi)

    maps = np.empty((num_coils, h, w), dtype=np.complex128)
    for i in range(num_coils):
        angle = start + 2 * np.pi * i / num_coils
        cy, cx = radius * np.sin(angle), radius * np.cos(angle)
        if num_coils == 1:
            cy, cx = 0.0, 0.0
        magnitude = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))
        fy, fx = rng.uniform(-np.pi, np.pi, 2) / max(h, w)
        maps[i] = magnitude * np.exp(1j * (fy * yy + fx * xx))

    return SensitivityMaps.normalise(maps, support)


def _exact_trig(theta: float) -> tuple[float, float]:
    quarter = theta / 90
    if quarter == np.round(quarter):
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(quarter) % 4]
    rad = np.deg2rad(theta)
    return float(np.cos(rad)), float(np.sin(rad))


@lru_cache(maxsize=256)
def rotation_grid(shape: tuple, theta: float) -> ad.ResampleGrid:
    """Return the bilinear grid rotating an image of shape (H, W) by theta degrees
    counter-clockwise about its centre ((H - 1) / 2, (W - 1) / 2), with zero fill.

    Multiples of 90 degrees use exact trigonometric values, so on a square grid they
    permute pixels without interpolation.
    """
    h, w = shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    c, s = _exact_trig(theta)
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    # Output pixel p reads input pixel R(-theta) p, with rows pointing down
    src_y = cy + c * yy + s * xx
    src_x = cx - s * yy + c * xx

    return ad.ResampleGrid((h, w), src_y, src_x)


def rotate_image(x, theta: float):
    """Rotate the last two axes of x by theta degrees. theta = 0 is the identity."""
    if theta == 0:
        return x
    shape = tuple(np.shape(ad._value(x))[-2:])
    return ad.bilinear(x, rotation_grid(shape, float(theta)))
