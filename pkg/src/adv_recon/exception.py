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

from typing import Any


class WorkbenchError(Exception):
    """The base class of all exceptions originating in this package."""

    pass


class ShapeError(WorkbenchError, ValueError):
    """Exception raised when array shapes do not conform to an operation's shape rule.

    Args:
        args: Optional positional arguments, the first of which should be a message
        string.
        primitive: The name of the operation whose shape rule was violated.
        expected: The expected shape(s) or dimension(s), if known.
        observed: The observed shape(s) or dimension(s).
    """

    def __init__(
        self, *args, primitive: Any = None, expected: Any = None, observed: Any = None
    ):
        super().__init__(*args)
        self.message = args[0] if len(args) > 0 else ""
        self.primitive = primitive
        self.expected = expected
        self.observed = observed


class NumericalError(WorkbenchError, ArithmeticError):
    """Exception raised when a computation produces non-finite values.

    Args:
        args: Optional positional arguments, the first of which should be a message
        string.
        step: The optimisation step at which the failure was detected, if any.
        epoch: The training epoch at which the failure was detected, if any.
    """

    def __init__(self, *args, step: Any = None, epoch: Any = None):
        super().__init__(*args)
        self.message = args[0] if len(args) > 0 else ""
        self.step = step
        self.epoch = epoch


class DataFormatError(WorkbenchError):
    """The base class of errors raised when reading or writing datasets, perturbation
    stores and checkpoints.

    Subclasses carry a distinct code so that callers can distinguish the failure
    without matching on message text.

    Args:
        args: Optional positional arguments, the first of which should be a message
        string.
        path: The affected file or directory.
        record: The affected record identifier, if any.
    """

    code = "format"

    def __init__(self, *args, path: Any = None, record: Any = None):
        super().__init__(*args)
        self.message = args[0] if len(args) > 0 else ""
        self.path = path
        self.record = record


class FormatVersionError(DataFormatError):
    """Exception raised when a file was written by an incompatible format version."""

    code = "version"

    def __init__(self, *args, observed: Any = None, expected: Any = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.observed = observed
        self.expected = expected


class ChecksumError(DataFormatError):
    """Exception raised when a record's payload does not match its recorded checksum.

    Args:
        args: Optional positional arguments, the first of which should be a message
        string.
        observed: The observed checksum.
        expected: The checksum recorded in the manifest.
    """

    code = "checksum"

    def __init__(self, *args, observed: Any = None, expected: Any = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.observed = observed
        self.expected = expected


class TruncatedDataError(DataFormatError):
    """Exception raised when a payload is shorter than its manifest entry declares."""

    code = "truncated"


class MissingModelError(WorkbenchError):
    """Exception raised when a required model checkpoint is not available.

    Args:
        args: Optional positional arguments, the first of which should be a message
        string.
        path: The checkpoint path, if any.
        acceleration: The acceleration factor for which a model was required.
    """

    def __init__(self, *args, path: Any = None, acceleration: Any = None):
        super().__init__(*args)
        self.message = args[0] if len(args) > 0 else ""
        self.path = path
        self.acceleration = acceleration
