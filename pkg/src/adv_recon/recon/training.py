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
from enum import Enum, unique
from typing import Sequence

import numpy as np
from structlog import get_logger

from adv_recon import autodiff as ad
from adv_recon.exception import NumericalError
from adv_recon.metrics import ssim_loss
from adv_recon.mri import apply_mask, center_crop, make_cartesian_mask
from adv_recon.recon.operator import ReconOperator

log = get_logger(__name__)


@unique
class Loss(Enum):
    """Training losses."""

    L1 = "l1"
    SSIM = "one_minus_ssim"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TrainConfig:
    """Training settings. Masks are drawn per sample and step at the configured
    acceleration; shuffling and masks are seeded, so training is deterministic."""

    epochs: int = 20
    batch_size: int = 4
    learning_rate: float = 1e-3
    loss: Loss = Loss.SSIM
    acceleration: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        object.__setattr__(self, "loss", Loss(self.loss))


class Adam:
    """The Adam optimiser over a dict of named arrays."""

    def __init__(
        self,
        params: dict,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, params: dict, grads: dict) -> dict:
        """Return updated parameters; the inputs are not modified."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        updated = {}
        for name, p in params.items():
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = self.m[name] / (1 - b1**self.t)
            v_hat = self.v[name] / (1 - b2**self.t)
            step = self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
            updated[name] = (p - step).astype(p.dtype)
        return updated


def l1_loss(x, target: np.ndarray):
    return ad.reduce_sum(ad.magnitude(x - target)) / np.size(target)


def loss_function(loss: Loss):
    return {Loss.L1: l1_loss, Loss.SSIM: ssim_loss}[loss]


def train(model: ReconOperator, phantoms: Sequence, cfg: TrainConfig) -> ReconOperator:
    """Fit a reconstruction operator's parameters to phantoms.

    Every epoch visits the phantoms in a seeded random order, in batches. Each
    sample is undersampled with a freshly seeded Cartesian mask; gradients are
    averaged over the batch before an Adam step.

    Args:
        model: The operator to train; not modified.
        phantoms: The training set.
        cfg: Training settings.

    Returns:
        A trained copy of model whose history holds the mean training loss of each
        epoch.

    Raises:
        NumericalError: If a loss or gradient becomes non-finite.
    """
    if not phantoms:
        raise ValueError("Cannot train on an empty dataset")

    rng = np.random.default_rng(cfg.seed)
    loss_fn = loss_function(cfg.loss)
    params = {name: p.copy() for name, p in model.params.items()}
    optimiser = Adam(params, cfg.learning_rate)
    history = []

    log.info(
        "Starting training",
        kind=model.kind,
        num_parameters=model.num_parameters,
        num_samples=len(phantoms),
        epochs=cfg.epochs,
        loss=str(cfg.loss),
    )

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(phantoms))
        losses = []

        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads = {name: np.zeros_like(p) for name, p in params.items()}

            for i in batch:
                phantom = phantoms[i]
                mask = make_cartesian_mask(
                    phantom.shape[1],
                    cfg.acceleration,
                    seed=int(rng.integers(2**31)),
                )
                k = apply_mask(phantom.kspace(), mask)
                target = phantom.image
                if model.crop is not None:
                    target = center_crop(target, model.crop)

                tape = ad.Tape()
                leaves = {name: tape.leaf(p, name=name) for name, p in params.items()}
                loss = loss_fn(model(k, mask, phantom.maps, params=leaves), target)
                value = loss.item() if isinstance(loss, ad.Tensor) else float(loss)
                if not np.isfinite(value):
                    raise NumericalError(
                        f"Training loss became non-finite in epoch {epoch}",
                        epoch=epoch,
                    )
                losses.append(value)

                if not leaves:
                    continue
                sample_grads = tape.backward(loss)
                for name, leaf in leaves.items():
                    grads[name] += sample_grads[leaf.id] / len(batch)

            for name, g in grads.items():
                if not np.all(np.isfinite(g)):
                    raise NumericalError(
                        f"Gradient of {name} became non-finite in epoch {epoch}",
                        epoch=epoch,
                    )
            if params:
                params = optimiser.step(params, grads)

        history.append(float(np.mean(losses)))
        log.info("Completed epoch", epoch=epoch, loss=history[-1])

    trained = model.with_parameters(params)
    trained.acceleration = cfg.acceleration
    trained.history = history
    return trained
