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

"""Result tables, run manifests and image dumps."""

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from rich.table import Table
from structlog import get_logger

from adv_recon.attack import RESULT_FIELDS, ResultRow
from adv_recon.exception import DataFormatError
from adv_recon.version import version

log = get_logger(__name__)

RESULTS_SCHEMA = 1
RUN_MANIFEST = "run.json"

SUMMARY_FIELDS = (
    "model",
    "R",
    "attack",
    "smode",
    "param",
    "n",
    "ssim_base_mean",
    "ssim_base_std",
    "ssim_adv_mean",
    "ssim_adv_std",
    "degradation_mean",
    "objective_mean",
)

CURVE_FIELDS = ("model", "R", "smode", "sample", "param", "theta", "objective", "ssim")


def _format(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def write_results(path, rows: Iterable[ResultRow]):
    """Write sweep rows as CSV with the fixed column order."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        for row in rows:
            writer.writerow([_format(v) for v in row.values()])


def read_results(path) -> list[ResultRow]:
    """Read sweep rows written by write_results.

    Raises:
        DataFormatError: If the header does not match the results schema.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_FIELDS:
            raise DataFormatError(
                f"{path} does not have the results header {','.join(RESULT_FIELDS)}",
                path=str(path),
            )

        rows = []
        for n, values in enumerate(reader, start=2):
            d = dict(zip(RESULT_FIELDS, values))
            try:
                rows.append(
                    ResultRow(
                        model=d["model"],
                        R=int(d["R"]),
                        attack=d["attack"],
                        smode=d["smode"],
                        param=float(d["param"]),
                        seed=int(d["seed"]),
                        sample=d["sample"],
                        ssim_base=float(d["ssim_base"]),
                        ssim_adv=float(d["ssim_adv"]),
                        psnr_base=float(d["psnr_base"]),
                        psnr_adv=float(d["psnr_adv"]),
                        objective=float(d["objective"]),
                    )
                )
            except (KeyError, ValueError) as e:
                raise DataFormatError(
                    f"Invalid results row at line {n}: {e}", path=str(path), record=n
                )
    return rows


@dataclass(frozen=True)
class SummaryRow:
    model: str
    R: int
    attack: str
    smode: str
    param: float
    n: int
    ssim_base_mean: float
    ssim_base_std: float
    ssim_adv_mean: float
    ssim_adv_std: float
    degradation_mean: float
    objective_mean: float

    def values(self) -> list:
        return [getattr(self, name) for name in SUMMARY_FIELDS]


def summarise(rows: Sequence[ResultRow]) -> list[SummaryRow]:
    """Aggregate rows by (model, R, attack, smode, param) into means and population
    standard deviations. Groups are returned in sorted key order."""
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        key = (row.model, row.R, row.attack, row.smode, row.param)
        groups.setdefault(key, []).append(row)

    summary = []
    for key in sorted(groups):
        group = groups[key]
        base = np.array([r.ssim_base for r in group])
        adv = np.array([r.ssim_adv for r in group])
        summary.append(
            SummaryRow(
                *key,
                n=len(group),
                ssim_base_mean=float(base.mean()),
                ssim_base_std=float(base.std()),
                ssim_adv_mean=float(adv.mean()),
                ssim_adv_std=float(adv.std()),
                degradation_mean=float((base - adv).mean()),
                objective_mean=float(np.mean([r.objective for r in group])),
            )
        )
    return summary


def write_summary(path, summary: Iterable[SummaryRow]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for row in summary:
            writer.writerow([_format(v) for v in row.values()])


def summary_table(summary: Sequence[SummaryRow]) -> Table:
    table = Table(title="Region SSIM under attack")
    for name in ("model", "R", "attack", "smode", "param", "n"):
        table.add_column(name)
    for name in ("SSIM base", "SSIM attacked", "degradation"):
        table.add_column(name, justify="right")

    for s in summary:
        table.add_row(
            s.model,
            str(s.R),
            s.attack,
            s.smode,
            f"{s.param:g}",
            str(s.n),
            f"{s.ssim_base_mean:.4f} ± {s.ssim_base_std:.4f}",
            f"{s.ssim_adv_mean:.4f} ± {s.ssim_adv_std:.4f}",
            f"{s.degradation_mean:.4f}",
        )
    return table


def write_curves(path, rows: Iterable[ResultRow]):
    """Write the per-angle objective and SSIM curves of rotation attack rows."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_FIELDS)
        for row in rows:
            if row.report is None or not row.report.curve:
                continue
            for theta, obj, score in row.report.curve:
                writer.writerow(
                    [
                        _format(v)
                        for v in (
                            row.model,
                            row.R,
                            row.smode,
                            row.sample,
                            row.param,
                            theta,
                            obj,
                            score,
                        )
                    ]
                )


def write_reports(path, rows: Iterable[ResultRow]):
    """Write the JSON parts of each row's attack report, keyed by row."""
    records = []
    for row in rows:
        d = {name: getattr(row, name) for name in RESULT_FIELDS}
        if row.report is not None:
            d["report"] = row.report.to_dict()
        records.append(d)

    with open(path, "w") as f:
        json.dump(records, f, indent=2, default=_json_default)
        f.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"{type(o)} is not JSON serialisable")


def write_pgm(path, image: np.ndarray, maximum: float = None):
    """Write an image as a 16-bit binary portable graymap (P5).

    Intensities are scaled linearly so that maximum (by default the image's own
    maximum) maps to 65535; negative values are clipped to 0. Samples are
    big-endian, as the format requires.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"Only 2-D images can be written, got shape {image.shape}")
    if maximum is None:
        maximum = float(image.max()) if image.size else 0.0

    if maximum > 0:
        scaled = np.clip(image / maximum, 0, 1)
    else:
        scaled = np.zeros_like(image)
    pixels = np.round(scaled * 65535).astype(">u2")

    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a 16-bit P5 portable graymap written by write_pgm."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise DataFormatError(
            f"{path} is not a binary portable graymap", path=str(path)
        )
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 65535:
        raise DataFormatError(f"{path} is not a 16-bit graymap", path=str(path))

    pixels = np.frombuffer(parts[3], dtype=">u2")
    if pixels.size != w * h:
        raise DataFormatError(f"{path} is truncated", path=str(path))
    return pixels.reshape(h, w).astype(np.uint16)


def difference_image(baseline: np.ndarray, attacked: np.ndarray) -> np.ndarray:
    """Return |attacked - baseline|, nonnegative and 0 where the images agree."""
    return np.abs(np.asarray(attacked) - np.asarray(baseline))


def dump_images(directory, prefix: str, baseline: np.ndarray, attacked: np.ndarray):
    """Write baseline, attacked and difference graymaps, each scaled by its own
    maximum.

    Returns:
        The paths written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, image in (
        ("baseline", baseline),
        ("attacked", attacked),
        ("diff", difference_image(baseline, attacked)),
    ):
        path = directory / f"{prefix}_{name}.pgm"
        write_pgm(path, image)
        paths.append(path)
    return paths


def write_chart(path, summary: Sequence[SummaryRow]):
    """Draw mean attacked region SSIM against the attack parameter, one line per
    (model, R, attack, smode), and save it as SVG."""
    series: dict[tuple, list[SummaryRow]] = {}
    for s in summary:
        series.setdefault((s.model, s.R, s.attack, s.smode), []).append(s)

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for (model, r, attack, smode), points in sorted(series.items()):
        points = sorted(points, key=lambda p: p.param)
        ax.errorbar(
            [p.param for p in points],
            [p.ssim_adv_mean for p in points],
            yerr=[p.ssim_adv_std for p in points],
            marker="o",
            capsize=3,
            label=f"{model} R={r} {attack}/{smode}",
        )
    ax.set_xlabel("attack parameter")
    ax.set_ylabel("region SSIM")
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(fontsize="small")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "adv-recon"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


@dataclass
class RunManifest:
    """The record of one command invocation written to its output directory."""

    command: str
    config: dict
    seeds: list
    inputs: list
    outputs: list
    version: str = field(default_factory=version)
    results_schema: int = RESULTS_SCHEMA
    started: float = field(default_factory=time.time)
    wall_clock: float = 0.0

    def finish(self):
        self.wall_clock = time.time() - self.started

    def write(self, directory):
        path = Path(directory) / RUN_MANIFEST
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        return path

    @classmethod
    def read(cls, directory):
        path = Path(directory) / RUN_MANIFEST
        try:
            with open(path) as f:
                d = json.load(f)
        except FileNotFoundError:
            raise DataFormatError(f"No run manifest in {directory}", path=str(path))
        except json.JSONDecodeError as e:
            raise DataFormatError(f"Malformed run manifest: {e}", path=str(path))
        return cls(**d)
