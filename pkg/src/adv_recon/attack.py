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

"""Adversarial attacks on reconstruction operators.

Two attacks are provided. The noise attack searches, by projected gradient ascent,
for additive k-space noise z maximising the region-restricted reconstruction error

    |S * (f(M(k + z)) - X)|_2   subject to   |z_i|_2 <= eta |k_i|_2 for every coil i

where f is the reconstruction operator, M the sampling mask, X the fully sampled
reference image and S a binary region. The rotation attack evaluates the same error
for the rotated acquisition, rotating the reconstruction back before comparison,
over an evenly spaced grid of in-plane angles.
"""

import math
from dataclasses import dataclass, field
from enum import Enum, unique
from multiprocessing.pool import ThreadPool
from typing import Optional, Sequence

import numpy as np
from structlog import get_logger

from adv_recon import autodiff as ad
from adv_recon.data import Phantom
from adv_recon.exception import MissingModelError, NumericalError
from adv_recon.metrics import DEFAULT_METRICS, MetricConfig, psnr, region_ssim
from adv_recon.mri import (
    SamplingMask,
    SensitivityMaps,
    apply_mask,
    center_crop,
    coil_norms,
    make_cartesian_mask,
    rotate_image,
)
from adv_recon.recon import ReconOperator

log = get_logger(__name__)


@unique
class AttackKind(Enum):
    NOISE = "noise"
    ROTATION = "rotation"

    def __str__(self):
        return self.value


@unique
class RegionMode(Enum):
    """Which region the attack objective is restricted to."""

    ANNOTATED = "annotated"
    FULL = "full"

    def __str__(self):
        return self.value


@unique
class Provenance(Enum):
    ANNOTATION_BOX = "annotation_box"
    FULL_IMAGE = "full_image"


@dataclass(frozen=True, eq=False)
class RegionMask:
    """A binary region of the reconstructed image."""

    mask: np.ndarray
    provenance: Provenance = Provenance.ANNOTATION_BOX

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError(f"A region mask must be 2-D, got shape {mask.shape}")
        if not mask.any():
            raise ValueError("A region mask must select at least one voxel")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def full(cls, shape: tuple):
        return cls(np.ones(shape, dtype=bool), Provenance.FULL_IMAGE)

    @classmethod
    def for_phantom(cls, phantom: Phantom, mode: RegionMode, crop: tuple = None):
        """Return the first annotation box of a phantom, or the full image, in the
        coordinates of an operator's (optionally cropped) output."""
        if mode is RegionMode.FULL:
            shape = phantom.shape if crop is None else tuple(crop)
            return cls.full(shape)

        mask = phantom.region(0)
        if crop is not None:
            mask = center_crop(mask, crop)
        return cls(mask, Provenance.ANNOTATION_BOX)


@dataclass(frozen=True)
class NoiseAttackConfig:
    """Projected gradient ascent settings.

    Each step adds, per coil, the L2-normalised gradient scaled by
    step_size * eta * |k_i|_2 (or, if normalize_gradient is false, step_size times
    the raw gradient), then rescales every coil whose noise exceeds its budget back
    onto the budget sphere. Coils with a zero gradient step along a seeded random
    unit direction.
    """

    eta: float = 0.01
    steps: int = 10
    step_size: float = 0.5
    seed: int = 0
    track_best_iterate: bool = True
    normalize_gradient: bool = True
    restarts: int = 0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.restarts < 0:
            raise ValueError(f"restarts must be >= 0, got {self.restarts}")


@dataclass(frozen=True)
class RotationAttackConfig:
    """Grid search settings; angles in degrees."""

    theta_max: float = 5.0
    grid_step: float = 0.1

    def __post_init__(self):
        if not 0 <= self.theta_max <= 180:
            raise ValueError(f"theta_max must be in [0, 180], got {self.theta_max}")
        if not self.grid_step > 0:
            raise ValueError(f"grid_step must be > 0, got {self.grid_step}")

    def grid(self) -> np.ndarray:
        """Return the evenly spaced angles in [-theta_max, theta_max], including 0
        and both end points."""
        n = math.floor(self.theta_max / self.grid_step + 1e-9)
        angles = np.round(np.arange(-n, n + 1) * self.grid_step, 10)
        if angles[-1] < self.theta_max - 1e-12:
            angles = np.concatenate([[-self.theta_max], angles, [self.theta_max]])
        return angles + 0.0


@dataclass
class AttackReport:
    """The outcome of one attack.

    For a noise attack, perturbation holds z and constraint_slack the per-coil ratio
    |z_i| / (eta |k_i|). For a rotation attack, angle holds the maximising angle,
    curve the (angle, objective, region SSIM) triples over the grid and worst_ssim
    the smallest region SSIM on the grid.
    """

    kind: AttackKind
    parameter: float
    objective: float
    baseline_objective: float
    baseline_metrics: dict
    attacked_metrics: dict
    objective_trace: list = field(default_factory=list)
    perturbation: Optional[np.ndarray] = None
    constraint_slack: Optional[np.ndarray] = None
    angle: Optional[float] = None
    curve: list = field(default_factory=list)
    worst_ssim: Optional[float] = None
    baseline_image: Optional[np.ndarray] = None
    attacked_image: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        """Return the JSON-serialisable parts of this report."""
        d = {
            "kind": str(self.kind),
            "parameter": self.parameter,
            "objective": self.objective,
            "baseline_objective": self.baseline_objective,
            "baseline_metrics": self.baseline_metrics,
            "attacked_metrics": self.attacked_metrics,
            "objective_trace": list(self.objective_trace),
        }
        if self.constraint_slack is not None:
            d["constraint_slack"] = [float(s) for s in self.constraint_slack]
        if self.kind is AttackKind.ROTATION:
            d["angle"] = self.angle
            d["worst_ssim"] = self.worst_ssim
            d["curve"] = [list(c) for c in self.curve]
        return d


def objective(
    f: ReconOperator,
    k,
    z,
    mask: SamplingMask,
    target: np.ndarray,
    region,
    maps: SensitivityMaps = None,
):
    """Return |S * (f(M(k + z)) - X)|_2, differentiable with respect to z.

    Args:
        f: The reconstruction operator.
        k: Fully sampled k-space (N, H, W).
        z: The k-space perturbation, array or Tensor.
        mask: The sampling mask M.
        target: The reference image X.
        region: The region S, a RegionMask or boolean array.
        maps: Sensitivity maps, if f requires them.
    """
    s = np.asarray(getattr(region, "mask", region), dtype=np.float64)
    y = f(apply_mask(k + z, mask), mask, maps)
    return ad.sqrt(ad.masked_sum(ad.square(y - target), s))


def project(z: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    """Rescale each coil of z whose L2 norm exceeds its budget onto the budget
    sphere; other coils are unchanged."""
    norms = coil_norms(z)
    over = norms > budgets
    scale = np.where(over, budgets / np.where(over, norms, 1), 1)
    return z * scale[:, None, None]


def _random_unit(rng: np.random.Generator, shape: tuple, dtype) -> np.ndarray:
    d = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return (d / np.linalg.norm(d)).astype(dtype)


def _metrics(image, target, evaluation_region, cfg: MetricConfig) -> dict:
    return {
        "ssim": region_ssim(target, image, evaluation_region, cfg),
        "psnr": psnr(target, image, cfg),
    }


def pgd_noise_attack(
    f: ReconOperator,
    k: np.ndarray,
    mask: SamplingMask,
    target: np.ndarray,
    region,
    cfg: NoiseAttackConfig,
    maps: SensitivityMaps = None,
    initial: np.ndarray = None,
    evaluation_region=None,
    metric_cfg: MetricConfig = DEFAULT_METRICS,
) -> AttackReport:
    """Search for a per-coil bounded k-space perturbation maximising the region
    error of f.

    Projected gradient ascent is run from z = 0, then from the projected initial
    perturbation if one is given, then from cfg.restarts random feasible points.
    With best-iterate tracking, the feasible iterate of highest objective over all
    runs is returned (z = 0 included), so the returned objective is never below the
    unperturbed one.

    Args:
        f: The reconstruction operator.
        k: Fully sampled k-space (N, H, W).
        mask: The sampling mask.
        target: The fully sampled reference image.
        region: The region S restricting the objective.
        cfg: Attack settings.
        maps: Sensitivity maps, if f requires them.
        initial: An optional warm-start perturbation, e.g. the solution found at a
            smaller budget.
        evaluation_region: The region on which SSIM is reported; defaults to
            region.
        metric_cfg: Metric settings.

    Returns:
        AttackReport

    Raises:
        NumericalError: If the objective or its gradient is non-finite, naming the
            step.
    """
    k = np.asarray(k)
    evaluation_region = region if evaluation_region is None else evaluation_region
    budgets = cfg.eta * coil_norms(k)
    rng = np.random.default_rng(cfg.seed)

    def value(z) -> float:
        return float(objective(f, k, z, mask, target, region, maps))

    def value_and_grad(z, step) -> tuple[float, np.ndarray]:
        tape = ad.Tape()
        zt = tape.leaf(z, name="z")
        obj = objective(f, k, zt, mask, target, region, maps)
        v = obj.item()
        g = tape.backward(obj)[zt.id]
        if not (np.isfinite(v) and np.all(np.isfinite(g))):
            raise NumericalError(
                f"Non-finite objective or gradient at step {step}", step=step
            )
        return v, g

    def ascend(z, trace) -> tuple[float, np.ndarray]:
        best_v, best_z = -math.inf, z
        for step in range(cfg.steps + 1):
            if step < cfg.steps:
                v, g = value_and_grad(z, step)
            else:
                v = value(z)
            trace.append(v)
            log.debug("PGD step", step=step, objective=v, eta=cfg.eta)
            if v > best_v:
                best_v, best_z = v, z
            if step == cfg.steps:
                break

            if cfg.normalize_gradient:
                norms = coil_norms(g)
                direction = np.empty_like(g)
                for i, n in enumerate(norms):
                    if n > 0:
                        direction[i] = g[i] / n
                    else:
                        direction[i] = _random_unit(rng, g.shape[1:], g.dtype)
                update = cfg.step_size * budgets[:, None, None] * direction
            else:
                update = cfg.step_size * g
            z = project(z + update, budgets).astype(k.dtype, copy=False)

        if cfg.track_best_iterate:
            return best_v, best_z
        return v, z

    zero = np.zeros_like(k)
    baseline_objective = value(zero)

    if cfg.eta == 0:
        best_v, best_z, trace = baseline_objective, zero, [baseline_objective]
    else:
        starts = [zero]
        if initial is not None:
            starts.append(project(np.asarray(initial, dtype=k.dtype), budgets))
        for _ in range(cfg.restarts):
            starts.append(
                np.stack(
                    [
                        b * _random_unit(rng, k.shape[1:], k.dtype)
                        for b in budgets
                    ]
                )
            )

        best_v, best_z, trace = -math.inf, zero, []
        for start in starts:
            run_trace = []
            v, z = ascend(start, run_trace)
            if v > best_v or not trace:
                best_v, best_z, trace = v, z, run_trace

    baseline_image = f.apply(apply_mask(k, mask), mask, maps)
    attacked_image = (
        baseline_image
        if cfg.eta == 0
        else f.apply(apply_mask(k + best_z, mask), mask, maps)
    )
    slack = np.divide(
        coil_norms(best_z),
        budgets,
        out=np.zeros_like(budgets),
        where=budgets > 0,
    )

    log.debug(
        "Completed noise attack",
        eta=cfg.eta,
        baseline=baseline_objective,
        objective=best_v,
        max_slack=float(slack.max()),
    )

    return AttackReport(
        kind=AttackKind.NOISE,
        parameter=cfg.eta,
        objective=best_v,
        baseline_objective=baseline_objective,
        baseline_metrics=_metrics(
            baseline_image, target, evaluation_region, metric_cfg
        ),
        attacked_metrics=_metrics(
            attacked_image, target, evaluation_region, metric_cfg
        ),
        objective_trace=trace,
        perturbation=best_z,
        constraint_slack=slack,
        baseline_image=baseline_image,
        attacked_image=attacked_image,
    )


def rotate_kspace(k, theta: float):
    """Rotate every coil's image by theta degrees about the image centre, with
    bilinear interpolation and zero fill, and return its k-space."""
    if theta == 0:
        return k
    return ad.fft2c(rotate_image(ad.ifft2c(k), theta))


def rotate_maps(maps: SensitivityMaps, theta: float) -> SensitivityMaps:
    """Rotate sensitivity maps with the anatomy and re-normalise their RSS."""
    if maps is None or theta == 0:
        return maps
    rotated = rotate_image(maps.maps, theta)
    support = rotate_image(maps.support.astype(np.float64), theta) > 0.5
    return SensitivityMaps.normalise(rotated, support)


def rotation_attack(
    f: ReconOperator,
    k: np.ndarray,
    mask: SamplingMask,
    target: np.ndarray,
    region,
    cfg: RotationAttackConfig,
    maps: SensitivityMaps = None,
    evaluation_region=None,
    metric_cfg: MetricConfig = DEFAULT_METRICS,
) -> AttackReport:
    """Find the in-plane rotation maximising the region error of f by grid search.

    For each angle theta the acquisition is rotated, undersampled and reconstructed,
    and the reconstruction rotated back by -theta before comparison with the
    reference. Among maximising angles the one of smallest magnitude is chosen,
    negative before positive.

    Returns:
        AttackReport, with the full objective and SSIM curve over the grid.
    """
    k = np.asarray(k)
    evaluation_region = region if evaluation_region is None else evaluation_region
    s = np.asarray(getattr(region, "mask", region), dtype=np.float64)

    curve, images = [], {}
    for theta in cfg.grid():
        theta = float(theta)
        y = f.apply(
            apply_mask(rotate_kspace(k, theta), mask), mask, rotate_maps(maps, theta)
        )
        y = rotate_image(y, -theta)
        obj = float(np.sqrt(np.sum(s * (y - target) ** 2)))
        score = region_ssim(target, y, evaluation_region, metric_cfg)
        curve.append((theta, obj, score))
        images[theta] = y
        log.debug("Evaluated rotation", theta=theta, objective=obj, ssim=score)

    baseline = next(c for c in curve if c[0] == 0)
    best = None
    for c in sorted(curve, key=lambda c: (abs(c[0]), c[0])):
        if best is None or c[1] > best[1]:
            best = c
    theta_star = best[0]

    log.debug(
        "Completed rotation attack",
        theta_max=cfg.theta_max,
        theta=theta_star,
        baseline=baseline[1],
        objective=best[1],
    )

    return AttackReport(
        kind=AttackKind.ROTATION,
        parameter=cfg.theta_max,
        objective=best[1],
        baseline_objective=baseline[1],
        baseline_metrics=_metrics(images[0.0], target, evaluation_region, metric_cfg),
        attacked_metrics=_metrics(
            images[theta_star], target, evaluation_region, metric_cfg
        ),
        objective_trace=[c[1] for c in curve],
        angle=theta_star,
        curve=curve,
        worst_ssim=min(c[2] for c in curve),
        baseline_image=images[0.0],
        attacked_image=images[theta_star],
    )


RESULT_FIELDS = (
    "model",
    "R",
    "attack",
    "smode",
    "param",
    "seed",
    "sample",
    "ssim_base",
    "ssim_adv",
    "psnr_base",
    "psnr_adv",
    "objective",
)


@dataclass
class ResultRow:
    """One (sample, parameter) result of a sweep.

    For rotation attacks ssim_adv is the worst region SSIM over the angle grid.
    """

    model: str
    R: int
    attack: str
    smode: str
    param: float
    seed: int
    sample: str
    ssim_base: float
    ssim_adv: float
    psnr_base: float
    psnr_adv: float
    objective: float
    report: Optional[AttackReport] = field(default=None, repr=False, compare=False)

    def values(self) -> list:
        return [getattr(self, name) for name in RESULT_FIELDS]


def _attack_sample(
    index: int,
    phantom: Phantom,
    model: ReconOperator,
    model_name: str,
    acceleration: int,
    kind: AttackKind,
    parameters: Sequence[float],
    smode: RegionMode,
    seed: int,
    noise_defaults: NoiseAttackConfig,
    grid_step: float,
    full_mask: bool,
    metric_cfg: MetricConfig,
) -> list[ResultRow]:
    sample_seed = seed + index
    width = phantom.shape[1]
    if full_mask:
        mask = SamplingMask.full(width)
    else:
        mask = make_cartesian_mask(width, acceleration, seed=sample_seed)

    k = phantom.kspace()
    target = phantom.image
    if model.crop is not None:
        target = center_crop(target, model.crop)
    region = RegionMask.for_phantom(phantom, smode, model.crop)
    evaluation_region = RegionMask.for_phantom(
        phantom, RegionMode.ANNOTATED, model.crop
    )

    rows, previous = [], None
    for param in parameters:
        if kind is AttackKind.NOISE:
            cfg = NoiseAttackConfig(
                eta=param,
                steps=noise_defaults.steps,
                step_size=noise_defaults.step_size,
                seed=sample_seed,
                track_best_iterate=noise_defaults.track_best_iterate,
                normalize_gradient=noise_defaults.normalize_gradient,
                restarts=noise_defaults.restarts,
            )
            report = pgd_noise_attack(
                model,
                k,
                mask,
                target,
                region,
                cfg,
                maps=phantom.maps,
                initial=previous,
                evaluation_region=evaluation_region,
                metric_cfg=metric_cfg,
            )
            previous = report.perturbation
            ssim_adv = report.attacked_metrics["ssim"]
        else:
            cfg = RotationAttackConfig(theta_max=param, grid_step=grid_step)
            report = rotation_attack(
                model,
                k,
                mask,
                target,
                region,
                cfg,
                maps=phantom.maps,
                evaluation_region=evaluation_region,
                metric_cfg=metric_cfg,
            )
            ssim_adv = report.worst_ssim

        rows.append(
            ResultRow(
                model=model_name,
                R=acceleration,
                attack=str(kind),
                smode=str(smode),
                param=float(param),
                seed=sample_seed,
                sample=f"s{index:05d}",
                ssim_base=report.baseline_metrics["ssim"],
                ssim_adv=ssim_adv,
                psnr_base=report.baseline_metrics["psnr"],
                psnr_adv=report.attacked_metrics["psnr"],
                objective=report.objective,
                report=report,
            )
        )
        log.info(
            "Attacked sample",
            model=model_name,
            R=acceleration,
            attack=str(kind),
            param=float(param),
            sample=index,
            ssim_base=report.baseline_metrics["ssim"],
            ssim_adv=ssim_adv,
        )

    return rows


def sweep(
    models: dict,
    phantoms: Sequence[Phantom],
    kind: AttackKind,
    parameters: Sequence[float],
    accelerations: Sequence[int],
    smode: RegionMode,
    model_name: str = None,
    seed: int = 0,
    noise_defaults: NoiseAttackConfig = NoiseAttackConfig(),
    grid_step: float = 0.1,
    full_mask: bool = False,
    num_threads: int = 1,
    metric_cfg: MetricConfig = DEFAULT_METRICS,
) -> list[ResultRow]:
    """Attack every phantom at every parameter value and acceleration.

    Noise budgets are visited in ascending order for each sample, and each
    solution is offered as a warm start at the next budget, so the attained
    objective is non-decreasing in eta. Samples are attacked in parallel.

    Args:
        models: Reconstruction operators keyed by acceleration factor.
        phantoms: The evaluation set.
        kind: The attack.
        parameters: Budgets eta (noise) or maximum angles in degrees (rotation).
        accelerations: Acceleration factors to evaluate.
        smode: The region restricting the attack objective. SSIM is always
            reported on the first annotation box.
        model_name: The name reported in the model column; defaults to the
            operator kind.
        seed: Base seed; sample i uses seed + i for its mask and attack.
        noise_defaults: Step settings for noise attacks (eta and seed are set per
            job).
        grid_step: Angle grid spacing for rotation attacks.
        full_mask: Attack fully sampled acquisitions instead of undersampled ones.
        num_threads: Worker pool size.
        metric_cfg: Metric settings.

    Returns:
        Rows ordered by acceleration, sample and parameter.

    Raises:
        MissingModelError: If no model is available for a requested acceleration.
    """
    kind, smode = AttackKind(kind), RegionMode(smode)
    parameters = sorted(float(p) for p in parameters)
    for r in accelerations:
        if r not in models:
            raise MissingModelError(
                f"No model available for acceleration {r}", acceleration=r
            )

    jobs = []
    for r in accelerations:
        model = models[r]
        name = model_name or model.kind
        for i, phantom in enumerate(phantoms):
            jobs.append(
                (
                    i,
                    phantom,
                    model,
                    name,
                    r,
                    kind,
                    parameters,
                    smode,
                    seed,
                    noise_defaults,
                    grid_step,
                    full_mask,
                    metric_cfg,
                )
            )

    log.info(
        "Starting sweep",
        attack=str(kind),
        smode=str(smode),
        parameters=parameters,
        accelerations=list(accelerations),
        num_samples=len(phantoms),
        num_threads=num_threads,
    )
    with ThreadPool(num_threads) as pool:
        results = pool.starmap(_attack_sample, jobs)

    return [row for rows in results for row in rows]
