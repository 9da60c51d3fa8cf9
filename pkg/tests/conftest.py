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

# From the pytest docs:
#
# "The conftest.py file serves as a means of providing fixtures for an entire
# directory. Fixtures defined in a conftest.py can be used by any test in that
# package without needing to import them (pytest will automatically discover
# them)."

import logging
import os

import numpy as np
import pytest
import structlog

from adv_recon.data import generate_phantom, generate_phantoms, save_dataset
from adv_recon.mri import SensitivityMaps, make_cartesian_mask

logging.basicConfig(level=logging.ERROR)

structlog.configure(
    logger_factory=structlog.stdlib.LoggerFactory(),
    processors=[structlog.processors.JSONRenderer()],
)

tests_are_slow = pytest.mark.skipif(
    os.environ.get("ADV_RECON_ACCEPTANCE") != "1",
    reason="acceptance tests run only when ADV_RECON_ACCEPTANCE=1",
)

PHANTOM_SIZE = (32, 32)
PHANTOM_COILS = 2
PHANTOM_SEED = 3


@pytest.fixture(scope="session")
def phantom():
    """A small two-coil phantom."""
    return generate_phantom(PHANTOM_SIZE, PHANTOM_COILS, PHANTOM_SEED)


@pytest.fixture(scope="session")
def single_coil_phantom():
    """A phantom acquired with one coil of uniform sensitivity."""
    p = generate_phantom(PHANTOM_SIZE, 1, PHANTOM_SEED)
    maps = SensitivityMaps(np.ones((1, *PHANTOM_SIZE), dtype=np.complex128))
    return type(p)(p.image, maps, p.annotations, p.background_mask, p.seed)


@pytest.fixture(scope="session")
def phantoms():
    """Three small two-coil phantoms."""
    return generate_phantoms(3, PHANTOM_SIZE, PHANTOM_COILS, PHANTOM_SEED)


@pytest.fixture(scope="function")
def dataset_dir(tmp_path, phantoms):
    """A dataset directory holding the three small phantoms."""
    path = tmp_path / "dataset"
    save_dataset(path, phantoms)

    yield path


@pytest.fixture(scope="function")
def r4_mask():
    return make_cartesian_mask(PHANTOM_SIZE[1], 4, seed=11)


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(42)
