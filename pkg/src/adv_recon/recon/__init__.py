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

"""Differentiable reconstruction operators."""

from adv_recon.recon.operator import (
    ReconOperator,
    ZeroFilled,
    ZeroFilledConfig,
    zero_filled,
)
from adv_recon.recon.unet import UNetConfig, UNetRecon
from adv_recon.recon.varnet import VarNet, VarNetConfig

OPERATORS = {
    ZeroFilled.kind: (ZeroFilled, ZeroFilledConfig),
    UNetRecon.kind: (UNetRecon, UNetConfig),
    VarNet.kind: (VarNet, VarNetConfig),
}


def build_operator(kind: str, config=None, acceleration: int = None) -> ReconOperator:
    """Return a freshly initialised operator.

    Args:
        kind: One of "zero_filled", "unet" or "varnet".
        config: A configuration dataclass, a dict of its fields, or None for the
            defaults.
        acceleration: The acceleration factor the operator is intended for.

    Returns:
        ReconOperator
    """
    try:
        cls, config_cls = OPERATORS[kind]
    except KeyError:
        raise ValueError(
            f"Unknown reconstruction operator '{kind}'; expected one of "
            f"{sorted(OPERATORS)}"
        )

    if isinstance(config, dict):
        fields = dict(config)
        if fields.get("crop") is not None:
            fields["crop"] = tuple(fields["crop"])
        config = config_cls(**fields)

    return cls(config, acceleration)


__all__ = [
    "OPERATORS",
    "ReconOperator",
    "UNetConfig",
    "UNetRecon",
    "VarNet",
    "VarNetConfig",
    "ZeroFilled",
    "ZeroFilledConfig",
    "build_operator",
    "zero_filled",
]
