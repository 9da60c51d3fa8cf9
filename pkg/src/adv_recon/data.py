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

"""Synthetic phantoms with annotated regions and the on-disk record store.

A record store is a directory holding a manifest.json and one binary blob per
record under blobs/. The manifest lists each record's arrays (dtype, shape, byte
offset and length within the blob) and the SHA-256 of the blob. Arrays are stored
little-endian; complex arrays are interleaved real/imaginary pairs. See
docs/format.md.
"""

import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field, replace
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from structlog import get_logger

from adv_recon import metrics
from adv_recon.exception import (
    ChecksumError,
    DataFormatError,
    FormatVersionError,
    TruncatedDataError,
)
from adv_recon.mri import (
    SensitivityMaps,
    apply_mask,
    coil_images,
    make_cartesian_mask,
    rss_combine,
    simulate_sensitivity_maps,
    synthesize_kspace,
)

log = get_logger(__name__)

FORMAT_VERSION = "1.0"
MANIFEST = "manifest.json"
BLOBS = "blobs"
ENTRY_DIGEST = "entry_sha256"

MIN_BOX_SIZE = 8
MAX_ATTEMPTS = 20
RESEED_STRIDE = 7919
REJECTION_SSIM = 0.95
REJECTION_ACCELERATION = 8


@dataclass(frozen=True)
class AnnotationBox:
    """A rectangular annotation in pixel units; x and width run along columns."""

    x: int
    y: int
    width: int
    height: int
    label: str = "band"

    def __post_init__(self):
        if self.width < MIN_BOX_SIZE or self.height < MIN_BOX_SIZE:
            raise ValueError(
                f"Annotation box {self.width}x{self.height} is smaller than the "
                f"minimum of {MIN_BOX_SIZE}x{MIN_BOX_SIZE}"
            )
        if self.x < 0 or self.y < 0:
            raise ValueError(f"Annotation box origin ({self.x}, {self.y}) is negative")

    def within(self, shape: tuple) -> bool:
        h, w = shape
        return self.y + self.height <= h and self.x + self.width <= w

    def mask(self, shape: tuple) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        m[self.y : self.y + self.height, self.x : self.x + self.width] = True
        return m

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "width": self.width,
            "height": self.height,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict):
        return cls(
            int(d["x"]), int(d["y"]), int(d["width"]), int(d["height"]), d["label"]
        )


@dataclass(frozen=True, eq=False)
class Phantom:
    """A ground-truth image with its coil sensitivities, annotations and a mask of
    signal-free background voxels."""

    image: np.ndarray
    maps: SensitivityMaps
    annotations: tuple
    background_mask: np.ndarray
    seed: int

    def __post_init__(self):
        image = np.asarray(self.image)
        if image.ndim != 2:
            raise ValueError(f"Phantom image must be 2-D, got shape {image.shape}")
        if np.any(image < 0):
            raise ValueError("Phantom image must be nonnegative")
        if image.shape != self.maps.shape:
            raise ValueError(
                f"Phantom image {image.shape} and maps {self.maps.shape} differ in "
                "shape"
            )
        if not self.annotations:
            raise ValueError("A phantom requires at least one annotation")

        background = np.asarray(self.background_mask, dtype=bool)
        for box in self.annotations:
            if not box.within(image.shape):
                raise ValueError(f"{box} lies outside the image {image.shape}")
            if np.any(background & box.mask(image.shape)):
                raise ValueError(f"{box} overlaps the background mask")

        object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(self, "background_mask", background)

    @property
    def shape(self) -> tuple:
        return self.image.shape

    @property
    def num_coils(self) -> int:
        return self.maps.num_coils

    def kspace(self) -> np.ndarray:
        """Return the fully sampled multi-coil k-space of this phantom."""
        return synthesize_kspace(self.image, self.maps)

    def astype(self, dtype):
        """Return a copy with the image in a real dtype and maps in the matching
        complex dtype, so that its k-space has that precision."""
        return replace(
            self, image=self.image.astype(dtype), maps=self.maps.astype(dtype)
        )

    def region(self, index: int = 0) -> np.ndarray:
        """Return the boolean mask of an annotation box."""
        return self.annotations[index].mask(self.shape)

    def __eq__(self, other):
        if not isinstance(other, Phantom):
            return False
        return (
            np.array_equal(self.image, other.image)
            and np.array_equal(self.maps.maps, other.maps.maps)
            and np.array_equal(self.maps.support, other.maps.support)
            and self.annotations == other.annotations
            and np.array_equal(self.background_mask, other.background_mask)
            and self.seed == other.seed
        )

    __hash__ = None


def _ellipse(yy, xx, cy, cx, ry, rx, angle):
    """Return the ellipse's quadratic form; < 1 inside."""
    c, s = np.cos(angle), np.sin(angle)
    u = (xx - cx) * c + (yy - cy) * s
    v = -(xx - cx) * s + (yy - cy) * c
    return (u / rx) ** 2 + (v / ry) ** 2


def _draw_phantom(size: tuple, num_coils: int, seed: int) -> Phantom:
    h, w = size
    rng = np.random.default_rng(seed)

    # Normalised coordinates in [-1, 1]
    yy, xx = np.meshgrid(
        (np.arange(h) - (h - 1) / 2) / (h / 2),
        (np.arange(w) - (w - 1) / 2) / (w / 2),
        indexing="ij",
    )

    cy, cx = rng.uniform(-0.05, 0.05, 2)
    ry, rx = rng.uniform(0.7, 0.85), rng.uniform(0.6, 0.75)
    angle = rng.uniform(-0.3, 0.3)
    body = _ellipse(yy, xx, cy, cx, ry, rx, angle)
    inside = body < 1

    gy, gx = rng.uniform(-1, 1, 2)
    image = 0.6 + 0.15 * (gy * yy + gx * xx)

    for _ in range(rng.integers(2, 5)):
        scale = rng.uniform(0.15, 0.4)
        offset = rng.uniform(-0.4, 0.4, 2) * (ry, rx)
        sub = _ellipse(
            yy,
            xx,
            cy + offset[0],
            cx + offset[1],
            scale * ry,
            rng.uniform(0.5, 1.0) * scale * rx,
            rng.uniform(0, np.pi),
        )
        image = image + rng.uniform(-0.3, 0.3) * (sub < 1)

    # A "ligament": parallel thin bright lines, enclosed by the annotation box
    side = max(MIN_BOX_SIZE, int(round(min(h, w) / 4)))
    shift_y, shift_x = rng.uniform(-0.2, 0.2, 2)
    by = int(np.clip((h - side) / 2 + shift_y * h / 2, 0, h - side))
    bx = int(np.clip((w - side) / 2 + shift_x * w / 2, 0, w - side))
    box = AnnotationBox(bx, by, side, side, "band")

    py, px = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    phi = rng.uniform(0, np.pi)
    dist = (py - (by + side / 2)) * np.cos(phi) - (px - (bx + side / 2)) * np.sin(phi)
    spacing = rng.uniform(2.5, 3.5)
    lines = (np.abs(dist) < spacing * 1.5) & (
        np.abs(dist - spacing * np.round(dist / spacing)) < 0.6
    )
    interior = np.zeros((h, w), dtype=bool)
    interior[by + 1 : by + side - 1, bx + 1 : bx + side - 1] = True
    image = image + rng.uniform(0.4, 0.6) * (lines & interior)

    image = np.where(inside | interior, np.clip(image, 0, None), 0.0)

    background = (body >= 1.21) & ~box.mask((h, w))
    maps = simulate_sensitivity_maps((h, w), num_coils, seed=seed)

    return Phantom(image, maps, (box,), background, seed)


def _is_trivial(phantom: Phantom) -> bool:
    mask = make_cartesian_mask(
        phantom.shape[1], REJECTION_ACCELERATION, seed=phantom.seed
    )
    zero_filled = rss_combine(coil_images(apply_mask(phantom.kspace(), mask)))
    score = metrics.region_ssim(phantom.image, zero_filled, phantom.region())

    return score >= REJECTION_SSIM


def generate_phantom(size: tuple, num_coils: int, seed: int) -> Phantom:
    """Generate a synthetic phantom.

    The anatomy is an ellipse with a smooth intensity gradient and a few inner
    ellipses of different contrast. One annotation box encloses a set of thin,
    high-contrast parallel lines. A phantom whose box is reconstructed with region
    SSIM >= 0.95 by a zero-filled R=8 reconstruction is rejected, and another is
    drawn from seed + 7919 * attempt. The returned phantom records the seed it was
    drawn from.

    Args:
        size: (H, W), each >= 32.
        num_coils: Number of receiver coils, >= 1.
        seed: Random seed.

    Returns:
        Phantom
    """
    h, w = size
    if h < 32 or w < 32:
        raise ValueError(f"Phantom size must be at least 32x32, got {h}x{w}")
    if num_coils < 1:
        raise ValueError(f"The number of coils must be >= 1, got {num_coils}")

    for attempt in range(MAX_ATTEMPTS):
        draw_seed = seed + RESEED_STRIDE * attempt
        phantom = _draw_phantom((h, w), num_coils, draw_seed)
        if not _is_trivial(phantom):
            return phantom
        log.warning(
            "Re-seeding trivially reconstructible phantom",
            seed=seed,
            attempt=attempt,
            draw_seed=draw_seed,
        )

    raise RuntimeError(
        f"Failed to generate a non-trivial phantom from seed {seed} "
        f"in {MAX_ATTEMPTS} attempts"
    )


def generate_phantoms(
    n: int, size: tuple, num_coils: int, seed: int, num_threads: int = 1
) -> list[Phantom]:
    """Generate n phantoms from seeds seed, seed + 1, ...

    Returns:
        The phantoms in seed order.
    """
    seeds = [seed + i for i in range(n)]
    with ThreadPool(num_threads) as pool:
        return pool.starmap(
            generate_phantom, [(size, num_coils, s) for s in seeds]
        )


_DTYPES = {
    np.dtype(np.float64): "<f8",
    np.dtype(np.float32): "<f4",
    np.dtype(np.complex128): "<c16",
    np.dtype(np.complex64): "<c8",
    np.dtype(np.bool_): "|u1",
    np.dtype(np.uint8): "|u1",
    np.dtype(np.int64): "<i8",
}


def encode_array(arr: np.ndarray) -> tuple[str, bytes]:
    """Return the storage dtype code and little-endian bytes of an array."""
    arr = np.asarray(arr)
    try:
        code = _DTYPES[arr.dtype.newbyteorder("=")]
    except KeyError:
        raise DataFormatError(f"Arrays of dtype {arr.dtype} cannot be stored")
    return code, np.ascontiguousarray(arr, dtype=np.dtype(code)).tobytes()


def decode_array(code: str, shape: Iterable[int], data: bytes, offset: int = 0):
    shape = tuple(shape)
    dtype = np.dtype(code)
    count = int(np.prod(shape, dtype=np.int64))
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape)
    return arr.astype(dtype.newbyteorder("="))


@dataclass
class Record:
    """One stored item: an identifier, JSON-serialisable metadata and named
    arrays."""

    id: str
    meta: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)


def entry_digest(entry: dict) -> str:
    """Return the SHA-256 of the canonical JSON of a manifest record entry,
    excluding the digest itself."""
    body = {k: v for k, v in entry.items() if k != ENTRY_DIGEST}
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_record(blob_dir: Path, record: Record) -> dict:
    entries, chunks, offset = [], [], 0
    for name, arr in record.arrays.items():
        code, data = encode_array(arr)
        entries.append(
            {
                "name": name,
                "dtype": code,
                "shape": list(np.shape(arr)),
                "offset": offset,
                "nbytes": len(data),
            }
        )
        chunks.append(data)
        offset += len(data)

    payload = b"".join(chunks)
    blob = f"{record.id}.bin"
    with open(blob_dir / blob, "wb") as f:
        f.write(payload)

    entry = {
        "id": record.id,
        "blob": f"{BLOBS}/{blob}",
        "nbytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "meta": record.meta,
        "arrays": entries,
    }
    entry[ENTRY_DIGEST] = entry_digest(entry)
    return entry


def save_records(path, kind: str, records: Iterable[Record], meta: dict = None):
    """Write records to a store directory.

    The store is written into a temporary sibling directory which replaces path
    only once complete, so a failed write leaves no partial store.

    Args:
        path: The store directory.
        kind: The kind of record, e.g. "dataset" or "perturbations".
        records: The records.
        meta: Optional store-level metadata.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))

    try:
        (tmp / BLOBS).mkdir()
        entries = [_write_record(tmp / BLOBS, r) for r in records]
        manifest = {
            "format": "adv-recon",
            "kind": kind,
            "version": FORMAT_VERSION,
            "meta": meta or {},
            "records": entries,
        }
        with open(tmp / MANIFEST, "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")

        if path.exists():
            shutil.rmtree(path)
        os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise

    log.info("Saved records", path=str(path), kind=kind, num_records=len(entries))


def check_version(version: Any, path=None, record=None):
    """Raise FormatVersionError unless version is a 1.x version string."""
    expected = FORMAT_VERSION
    try:
        major = int(str(version).split(".")[0])
    except ValueError:
        raise FormatVersionError(
            f"Malformed format version '{version}'",
            path=path,
            record=record,
            observed=version,
            expected=expected,
        )
    if major != int(expected.split(".")[0]):
        raise FormatVersionError(
            f"Format version {version} is not supported; expected {expected}",
            path=path,
            record=record,
            observed=version,
            expected=expected,
        )


def load_records(path, kind: str = None) -> tuple[dict, list[Record]]:
    """Read and verify all records of a store directory.

    The format version and every manifest entry digest are checked before any
    blob is read, and every blob is verified against its length and checksum
    before any array is decoded.

    Args:
        path: The store directory.
        kind: If given, the expected kind of record.

    Returns:
        The store-level metadata and the records.
    """
    path = Path(path)
    manifest_path = path / MANIFEST
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise DataFormatError(f"No manifest found in {path}", path=str(path))
    except json.JSONDecodeError as e:
        raise DataFormatError(f"Malformed manifest: {e}", path=str(manifest_path))

    check_version(manifest.get("version"), path=str(manifest_path))
    if kind is not None and manifest.get("kind") != kind:
        raise DataFormatError(
            f"Expected a store of kind '{kind}', found '{manifest.get('kind')}'",
            path=str(path),
        )

    for entry in manifest["records"]:
        rid = entry["id"]
        expected = entry.get(ENTRY_DIGEST)
        observed = entry_digest(entry)
        if observed != expected:
            raise ChecksumError(
                f"Manifest entry of record {rid} does not match its checksum",
                path=str(manifest_path),
                record=rid,
                observed=observed,
                expected=expected,
            )

    payloads = []
    for entry in manifest["records"]:
        rid = entry["id"]
        blob_path = path / entry["blob"]
        try:
            payload = blob_path.read_bytes()
        except FileNotFoundError:
            raise TruncatedDataError(
                f"Blob of record {rid} is missing", path=str(blob_path), record=rid
            )
        if len(payload) < entry["nbytes"]:
            raise TruncatedDataError(
                f"Blob of record {rid} has {len(payload)} bytes, "
                f"expected {entry['nbytes']}",
                path=str(blob_path),
                record=rid,
            )
        digest = hashlib.sha256(payload).hexdigest()
        if digest != entry["sha256"]:
            raise ChecksumError(
                f"Checksum mismatch in record {rid}",
                path=str(blob_path),
                record=rid,
                observed=digest,
                expected=entry["sha256"],
            )
        payloads.append(payload)

    records = []
    for entry, payload in zip(manifest["records"], payloads):
        arrays = {
            a["name"]: decode_array(a["dtype"], a["shape"], payload, a["offset"])
            for a in entry["arrays"]
        }
        records.append(Record(entry["id"], entry.get("meta", {}), arrays))

    log.debug("Loaded records", path=str(path), num_records=len(records))
    return manifest.get("meta", {}), records


def record_id(index: int) -> str:
    return f"p{index:05d}"


def save_dataset(path, phantoms: Iterable[Phantom]):
    """Save phantoms to a dataset directory."""
    records = []
    for i, p in enumerate(phantoms):
        meta = {
            "seed": p.seed,
            "annotations": [b.to_dict() for b in p.annotations],
        }
        arrays = {
            "image": p.image,
            "maps": p.maps.maps,
            "support": p.maps.support,
            "background": p.background_mask,
        }
        records.append(Record(record_id(i), meta, arrays))

    save_records(path, "dataset", records)


def load_dataset(path) -> list[Phantom]:
    """Load phantoms from a dataset directory.

    Raises:
        FormatVersionError, ChecksumError, TruncatedDataError: on an invalid store.
    """
    _, records = load_records(path, kind="dataset")

    phantoms = []
    for r in records:
        try:
            phantoms.append(
                Phantom(
                    r.arrays["image"],
                    SensitivityMaps(r.arrays["maps"], r.arrays["support"].astype(bool)),
                    tuple(AnnotationBox.from_dict(b) for b in r.meta["annotations"]),
                    r.arrays["background"].astype(bool),
                    int(r.meta["seed"]),
                )
            )
        except (KeyError, ValueError) as e:
            raise DataFormatError(
                f"Invalid record {r.id}: {e}", path=str(path), record=r.id
            )

    return phantoms
