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

"""Runtime configuration shared by the command line tools."""

import configparser
import os
from enum import Enum, unique

import numpy as np


@unique
class Precision(Enum):
    """Scalar precision of k-space data and model parameters."""

    FLOAT64 = "float64"
    FLOAT32 = "float32"

    @property
    def real_dtype(self) -> np.dtype:
        return np.dtype(np.float64 if self is Precision.FLOAT64 else np.float32)

    @property
    def complex_dtype(self) -> np.dtype:
        return np.dtype(np.complex128 if self is Precision.FLOAT64 else np.complex64)


class RuntimeConfig:
    """A runtime configuration which falls back on environment variables if values
    are not set in the constructor.

    The worker count sizes the pool used to run independent attack jobs. The
    precision selects 64-bit (default) or 32-bit arithmetic.
    """

    WORKERS = "workers"
    PRECISION = "precision"

    ENV_WORKERS = "ADV_RECON_WORKERS"
    ENV_PRECISION = "ADV_RECON_PRECISION"

    @classmethod
    def from_file(cls, ini_file, section):
        parser = configparser.ConfigParser()
        parser.read(ini_file)

        return cls(
            parser.get(section, cls.WORKERS, fallback=None),
            parser.get(section, cls.PRECISION, fallback=None),
        )

    def __init__(self, workers=None, precision=None):
        """Creates a new configuration.

        Args:
            workers: The number of worker threads. Defaults to the value of the
              ADV_RECON_WORKERS environment variable, or the number of logical
              processors if that is not set.
            precision: "float64" or "float32". Defaults to the value of the
              ADV_RECON_PRECISION environment variable, or "float64" if that is not
              set.
        """
        workers = workers if workers else os.environ.get(self.ENV_WORKERS)
        precision = precision if precision else os.environ.get(self.ENV_PRECISION)

        try:
            self.workers = int(workers) if workers else (os.cpu_count() or 1)
        except ValueError:
            raise ValueError(
                f"Worker count '{workers}' set by configuration or "
                f"{self.ENV_WORKERS} environment variable is not an integer"
            )
        if self.workers < 1:
            raise ValueError(f"Worker count must be at least 1, was {self.workers}")

        try:
            self.precision = Precision(precision if precision else "float64")
        except ValueError:
            raise ValueError(
                f"Precision '{precision}' set by configuration or "
                f"{self.ENV_PRECISION} environment variable is not one of "
                f"{[p.value for p in Precision]}"
            )

    def __repr__(self):
        return (
            f"RuntimeConfig(workers={self.workers}, "
            f"precision={self.precision.value})"
        )
