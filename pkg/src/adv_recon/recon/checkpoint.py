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

"""Single-file model checkpoints.

Layout: the 8-byte magic b"ADVRCKPT", the length of the JSON header as an unsigned
64-bit little-endian integer, the UTF-8 JSON header, then the parameter blobs.
The header records the operator kind, its configuration, the acceleration it was
trained for, the scalar precision, the training history and, for each parameter,
its dtype, shape, byte offset (relative to the end of the header), length and
SHA-256.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path

from structlog import get_logger

from adv_recon.data import FORMAT_VERSION, check_version, decode_array, encode_array
from adv_recon.exception import (
    ChecksumError,
    DataFormatError,
    MissingModelError,
    TruncatedDataError,
)
from adv_recon.recon import build_operator
from adv_recon.recon.operator import ReconOperator

log = get_logger(__name__)

MAGIC = b"ADVRCKPT"
LENGTH_BYTES = 8


def save_checkpoint(path, model: ReconOperator):
    """Write a model checkpoint, replacing any existing file atomically."""
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for name, p in model.named_parameters():
        code, data = encode_array(p)
        entries.append(
            {
                "name": name,
                "dtype": code,
                "shape": list(p.shape),
                "offset": offset,
                "nbytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        )
        chunks.append(data)
        offset += len(data)

    precision = (
        str(next(iter(model.params.values())).dtype) if model.params else "float64"
    )
    header = {
        "format": "adv-recon-checkpoint",
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "config": model.config_dict(),
        "acceleration": model.acceleration,
        "precision": precision,
        "history": list(model.history),
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(len(header_bytes).to_bytes(LENGTH_BYTES, "little"))
            f.write(header_bytes)
            for chunk in chunks:
                f.write(chunk)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise

    log.info("Saved checkpoint", path=str(path), kind=model.kind)


def load_checkpoint(path) -> ReconOperator:
    """Read a model checkpoint.

    Raises:
        MissingModelError: If there is no file at path.
        FormatVersionError, ChecksumError, TruncatedDataError, DataFormatError: If
            the file is not a valid checkpoint.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingModelError(f"No checkpoint at {path}", path=str(path))

    if data[: len(MAGIC)] != MAGIC:
        raise DataFormatError(f"{path} is not a checkpoint", path=str(path))
    start = len(MAGIC) + LENGTH_BYTES
    if len(data) < start:
        raise TruncatedDataError(f"Checkpoint {path} is truncated", path=str(path))
    header_len = int.from_bytes(data[len(MAGIC) : start], "little")
    if len(data) < start + header_len:
        raise TruncatedDataError(
            f"Checkpoint {path} header is truncated", path=str(path)
        )
    try:
        header = json.loads(data[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"Malformed checkpoint header: {e}", path=str(path))

    check_version(header.get("version"), path=str(path))
    payload = data[start + header_len :]

    params = {}
    for entry in header["tensors"]:
        name = entry["name"]
        end = entry["offset"] + entry["nbytes"]
        if len(payload) < end:
            raise TruncatedDataError(
                f"Parameter {name} is truncated", path=str(path), record=name
            )
        blob = payload[entry["offset"] : end]
        digest = hashlib.sha256(blob).hexdigest()
        if digest != entry["sha256"]:
            raise ChecksumError(
                f"Checksum mismatch in parameter {name}",
                path=str(path),
                record=name,
                observed=digest,
                expected=entry["sha256"],
            )
        params[name] = decode_array(entry["dtype"], entry["shape"], blob)

    try:
        model = build_operator(
            header["kind"], header.get("config"), header.get("acceleration")
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"Invalid checkpoint configuration: {e}", path=str(path))

    expected = {name: p.shape for name, p in model.named_parameters()}
    observed = {name: p.shape for name, p in params.items()}
    if expected != observed:
        raise DataFormatError(
            f"Checkpoint parameters do not match a {header['kind']} architecture",
            path=str(path),
        )

    model = model.with_parameters(params)
    model.history = [float(v) for v in header.get("history", [])]
    log.debug("Loaded checkpoint", path=str(path), kind=model.kind)
    return model
