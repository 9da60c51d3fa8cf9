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

import argparse
import csv
import sys
from pathlib import Path

import structlog
from rich.console import Console

from adv_recon import data
from adv_recon.attack import AttackKind, NoiseAttackConfig, RegionMode, sweep
from adv_recon.cli.util import (
    ExitCode,
    UsageErrorParser,
    add_logging_arguments,
    configure_logging,
    float_in_range,
    integer_in_range,
    positive_float,
)
from adv_recon.config import Precision, RuntimeConfig
from adv_recon.exception import (
    DataFormatError,
    MissingModelError,
    NumericalError,
    WorkbenchError,
)
from adv_recon.recon import UNetConfig, VarNetConfig, ZeroFilled, build_operator
from adv_recon.recon.checkpoint import load_checkpoint, save_checkpoint
from adv_recon.recon.training import Loss, TrainConfig, train
from adv_recon.report import (
    RunManifest,
    dump_images,
    read_results,
    summarise,
    summary_table,
    write_chart,
    write_curves,
    write_reports,
    write_results,
    write_summary,
)
from adv_recon.version import version

description = """
A workbench for adversarial robustness testing of MRI reconstruction methods.

Each sub-command performs one stage of an experiment and writes its outputs,
together with a run.json manifest describing the invocation, under --out:

    phantom  Generate a dataset of synthetic multi-coil phantoms, each with an
             annotated region of fine structure.
    train    Train a UNet or variational network reconstruction for one
             acceleration factor and save a checkpoint and its loss curve.
    attack   Attack one or more reconstruction models with adversarial k-space
             noise (projected gradient ascent under a per-coil L2 budget) or
             worst-case rotation (grid search), restricted to the annotated
             region or to the full image.
    report   Aggregate the results of attack runs into a summary table, a
             chart and graymap images of baseline, attacked and difference
             reconstructions.

Usage:

To see the CLI options available for the base command, use:

    advrec --help

each sub-command provides additional options which may be seen using:

    advrec <sub-command> --help

Examples:

    advrec --verbose phantom --n 20 --size 64 --coils 4 --seed 7 --out ds

    advrec --verbose train --model varnet --acceleration 4 --dataset ds \\
        --epochs 20 --out models/varnet-r4

    advrec --verbose attack --kind noise --model models/varnet-r4/model.ckpt \\
        --model zero_filled --acceleration 4 --dataset ds --smode annotated \\
        --eta 0 0.005 0.01 0.015 0.02 0.025 --out runs/noise-annotated

    advrec report runs/noise-annotated runs/noise-full --images --out summary

Runtime settings may be given as options, in the [adv_recon] section of an INI
file named by --config, or by the environment variables ADV_RECON_WORKERS (the
size of the worker pool attacking samples in parallel) and ADV_RECON_PRECISION
(float64 or float32).

Exit codes: 0 success, 1 usage error, 2 data error (invalid or missing dataset,
checkpoint or results), 3 numerical failure.
"""

CONFIG_SECTION = "adv_recon"
DEFAULT_ETAS = [0.0, 0.005, 0.01, 0.015, 0.02, 0.025]
DEFAULT_THETAS = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]

RESULTS = "results.csv"
REPORTS = "reports.json"
CURVES = "curves.csv"
PERTURBATIONS = "perturbations"
CHECKPOINT = "model.ckpt"
LOSS_CURVE = "loss.csv"

parser = UsageErrorParser(
    prog="advrec",
    description=description,
    formatter_class=argparse.RawDescriptionHelpFormatter,
)
add_logging_arguments(parser)
parser.add_argument(
    "--config",
    help=f"An INI file with a [{CONFIG_SECTION}] section setting 'workers' and/or "
    "'precision'.",
    type=str,
)
parser.add_argument(
    "--workers",
    help="The number of worker threads. Defaults to the ADV_RECON_WORKERS "
    "environment variable, or the number of logical processors.",
    type=integer_in_range(1, 1024),
)
parser.add_argument(
    "--precision",
    help="Scalar precision of k-space and model parameters. Defaults to the "
    "ADV_RECON_PRECISION environment variable, or float64.",
    choices=[p.value for p in Precision],
)
parser.add_argument("--version", help="Print the version and exit", action="store_true")

subparsers = parser.add_subparsers(title="Sub-commands")


def _manifest(cli_args, command: str, seeds, inputs, outputs) -> RunManifest:
    config = {
        k: (v if isinstance(v, (int, float, str, bool, list, type(None))) else str(v))
        for k, v in sorted(vars(cli_args).items())
        if k != "func"
    }
    return RunManifest(command, config, list(seeds), list(inputs), list(outputs))


def phantom(cli_args, runtime: RuntimeConfig):
    out = Path(cli_args.out)
    size = (cli_args.size, cli_args.size)
    phantoms = data.generate_phantoms(
        cli_args.n, size, cli_args.coils, cli_args.seed, num_threads=runtime.workers
    )
    manifest = _manifest(
        cli_args,
        "phantom",
        [p.seed for p in phantoms],
        [],
        [str(out)],
    )
    data.save_dataset(out, phantoms)
    manifest.finish()
    manifest.write(out)

    log.info("Generated phantoms", n=len(phantoms), out=str(out))


ph_parser = subparsers.add_parser(
    "phantom",
    help="Generate a dataset of synthetic phantoms.",
)
ph_parser.add_argument(
    "--n",
    help="The number of phantoms.",
    type=integer_in_range(1, 100_000),
    required=True,
)
ph_parser.add_argument(
    "--size",
    help="Image height and width in pixels. Default 64.",
    type=integer_in_range(32, 4096),
    default=64,
)
ph_parser.add_argument(
    "--coils",
    help="The number of receiver coils. Default 4.",
    type=integer_in_range(1, 64),
    default=4,
)
ph_parser.add_argument("--seed", help="Random seed. Default 0.", type=int, default=0)
ph_parser.add_argument("--out", help="Dataset directory.", type=str, required=True)
ph_parser.set_defaults(func=phantom)


def train_model(cli_args, runtime: RuntimeConfig):
    out = Path(cli_args.out)
    dtype = runtime.precision.real_dtype
    phantoms = [p.astype(dtype) for p in data.load_dataset(cli_args.dataset)]

    if cli_args.model == "unet":
        config = UNetConfig(
            top_channels=cli_args.top_channels or 8,
            depth=cli_args.depth or 3,
            seed=cli_args.seed,
        )
    else:
        config = VarNetConfig(
            cascades=cli_args.cascades,
            unet_top_channels=cli_args.top_channels or 6,
            unet_depth=cli_args.depth or 2,
            dc_weight_init=cli_args.dc_weight_init,
            seed=cli_args.seed,
        )
    model = build_operator(cli_args.model, config, cli_args.acceleration)
    model = model.cast(dtype)

    cfg = TrainConfig(
        epochs=cli_args.epochs,
        batch_size=cli_args.batch_size,
        learning_rate=cli_args.learning_rate,
        loss=Loss(cli_args.loss),
        acceleration=cli_args.acceleration,
        seed=cli_args.seed,
    )
    manifest = _manifest(
        cli_args,
        "train",
        [cli_args.seed],
        [cli_args.dataset],
        [str(out / CHECKPOINT), str(out / LOSS_CURVE)],
    )

    trained = train(model, phantoms, cfg)

    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / CHECKPOINT, trained)
    with open(out / LOSS_CURVE, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(trained.history):
            writer.writerow([epoch, repr(loss)])

    manifest.finish()
    manifest.write(out)
    log.info("Trained model", kind=trained.kind, out=str(out))


tr_parser = subparsers.add_parser(
    "train",
    help="Train a reconstruction model.",
)
tr_parser.add_argument(
    "--model", help="The model architecture.", choices=["unet", "varnet"], required=True
)
tr_parser.add_argument(
    "--acceleration",
    help="The acceleration factor R. Default 4.",
    type=int,
    choices=[4, 8],
    default=4,
)
tr_parser.add_argument("--dataset", help="Training dataset directory.", required=True)
tr_parser.add_argument(
    "--epochs",
    help="Training epochs. Default 20.",
    type=integer_in_range(0, 100_000),
    default=20,
)
tr_parser.add_argument(
    "--batch-size",
    "--batch_size",
    help="Samples per optimiser step. Default 4.",
    type=integer_in_range(1, 100_000),
    default=4,
)
tr_parser.add_argument(
    "--learning-rate",
    "--learning_rate",
    help="Adam learning rate. Default 0.001.",
    type=float_in_range(0, 1),
    default=1e-3,
)
tr_parser.add_argument(
    "--loss",
    help="Training loss. Default one_minus_ssim.",
    choices=[loss.value for loss in Loss],
    default=Loss.SSIM.value,
)
tr_parser.add_argument(
    "--top-channels",
    "--top_channels",
    help="Channels of the first UNet level. Default 8 (UNet) or 6 (variational "
    "network refinement).",
    type=integer_in_range(1, 256),
)
tr_parser.add_argument(
    "--depth",
    help="UNet depth. Default 3 (UNet) or 2 (variational network refinement).",
    type=integer_in_range(1, 8),
)
tr_parser.add_argument(
    "--cascades",
    help="Variational network cascades. Default 4.",
    type=integer_in_range(0, 64),
    default=4,
)
tr_parser.add_argument(
    "--dc-weight-init",
    "--dc_weight_init",
    help="Initial data-consistency weight. Default 1.0.",
    type=float,
    default=1.0,
)
tr_parser.add_argument("--seed", help="Random seed. Default 0.", type=int, default=0)
tr_parser.add_argument("--out", help="Output directory.", type=str, required=True)
tr_parser.set_defaults(func=train_model)


def _load_models(sources: list[str], accelerations: list[int], dtype) -> dict:
    """Return reconstruction operators keyed by name and then acceleration."""
    models: dict[str, dict] = {}
    for source in sources:
        if source == ZeroFilled.kind:
            models[source] = {r: ZeroFilled(acceleration=r) for r in accelerations}
            continue

        model = load_checkpoint(source).cast(dtype)
        by_r = models.setdefault(model.kind, {})
        if model.acceleration in by_r:
            raise ValueError(
                f"More than one {model.kind} checkpoint for acceleration "
                f"{model.acceleration}"
            )
        by_r[model.acceleration] = model
        log.info("Loaded model", path=source, kind=model.kind, R=model.acceleration)

    return models


def attack(cli_args, runtime: RuntimeConfig):
    out = Path(cli_args.out)
    kind = AttackKind(cli_args.kind)
    smode = RegionMode(cli_args.smode)
    phantoms = data.load_dataset(cli_args.dataset)
    if cli_args.limit is not None:
        phantoms = phantoms[: cli_args.limit]
    dtype = runtime.precision.real_dtype
    phantoms = [p.astype(dtype) for p in phantoms]

    models = _load_models(cli_args.model, cli_args.acceleration, dtype)
    if kind is AttackKind.NOISE:
        parameters = cli_args.eta if cli_args.eta is not None else DEFAULT_ETAS
    else:
        parameters = (
            cli_args.theta_max if cli_args.theta_max is not None else DEFAULT_THETAS
        )

    noise_defaults = NoiseAttackConfig(
        steps=cli_args.steps,
        step_size=cli_args.step_size,
        track_best_iterate=not cli_args.final_iterate,
        normalize_gradient=not cli_args.raw_gradient,
        restarts=cli_args.restarts,
    )
    manifest = _manifest(
        cli_args,
        "attack",
        [cli_args.seed + i for i in range(len(phantoms))],
        [cli_args.dataset, *cli_args.model],
        [str(out / name) for name in (RESULTS, REPORTS, CURVES, PERTURBATIONS)],
    )

    rows = []
    for name, by_r in models.items():
        rows.extend(
            sweep(
                by_r,
                phantoms,
                kind,
                parameters,
                cli_args.acceleration,
                smode,
                model_name=name,
                seed=cli_args.seed,
                noise_defaults=noise_defaults,
                grid_step=cli_args.grid_step,
                full_mask=cli_args.full_mask,
                num_threads=runtime.workers,
            )
        )

    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i, row in enumerate(rows):
        arrays = {
            "baseline": row.report.baseline_image,
            "attacked": row.report.attacked_image,
        }
        if row.report.perturbation is not None:
            arrays["perturbation"] = row.report.perturbation
        meta = {
            "model": row.model,
            "R": row.R,
            "param": row.param,
            "sample": row.sample,
        }
        if row.report.angle is not None:
            meta["angle"] = row.report.angle
        records.append(data.Record(f"r{i:06d}", meta, arrays))
    data.save_records(out / PERTURBATIONS, "perturbations", records)

    write_results(out / RESULTS, rows)
    write_reports(out / REPORTS, rows)
    if kind is AttackKind.ROTATION:
        write_curves(out / CURVES, rows)

    manifest.finish()
    manifest.write(out)
    log.info("Completed attack", kind=str(kind), num_rows=len(rows), out=str(out))


at_parser = subparsers.add_parser(
    "attack",
    help="Attack reconstruction models.",
)
at_parser.add_argument(
    "--kind", help="The attack.", choices=[k.value for k in AttackKind], required=True
)
at_parser.add_argument(
    "--model",
    help="A model checkpoint path, or 'zero_filled'. May be given more than once.",
    action="append",
    required=True,
)
at_parser.add_argument(
    "--acceleration",
    help="Acceleration factors to attack. Default 4 8.",
    type=int,
    choices=[4, 8],
    nargs="+",
    default=[4, 8],
)
at_parser.add_argument("--dataset", help="Evaluation dataset directory.", required=True)
at_parser.add_argument(
    "--smode",
    help="Restrict the attack objective to the annotated region or the full image. "
    "SSIM is always reported on the annotated region. Default annotated.",
    choices=[m.value for m in RegionMode],
    default=RegionMode.ANNOTATED.value,
)
at_parser.add_argument(
    "--eta",
    help="Relative per-coil noise budgets. Default 0 0.005 0.01 0.015 0.02 0.025.",
    type=float_in_range(0, 1),
    nargs="+",
)
at_parser.add_argument(
    "--theta-max",
    "--theta_max",
    help="Maximum rotation angles in degrees. Default 0 1 2 3 4 5.",
    type=float_in_range(0, 180),
    nargs="+",
)
at_parser.add_argument(
    "--grid-step",
    "--grid_step",
    help="Rotation grid spacing in degrees. Default 0.1.",
    type=positive_float,
    default=0.1,
)
at_parser.add_argument(
    "--steps",
    help="PGD steps. Default 10.",
    type=integer_in_range(1, 10_000),
    default=10,
)
at_parser.add_argument(
    "--step-size",
    "--step_size",
    help="PGD step size relative to the budget. Default 0.5.",
    type=positive_float,
    default=0.5,
)
at_parser.add_argument(
    "--restarts",
    help="Random feasible PGD restarts. Default 0.",
    type=integer_in_range(0, 1000),
    default=0,
)
at_parser.add_argument(
    "--raw-gradient",
    "--raw_gradient",
    help="Add the raw, rather than per-coil normalised, gradient at each step.",
    action="store_true",
)
at_parser.add_argument(
    "--final-iterate",
    "--final_iterate",
    help="Report the final PGD iterate rather than the best one.",
    action="store_true",
)
at_parser.add_argument(
    "--full-mask",
    "--full_mask",
    help="Attack fully sampled acquisitions.",
    action="store_true",
)
at_parser.add_argument(
    "--limit",
    help="Attack only the first LIMIT samples of the dataset.",
    type=integer_in_range(1, 1_000_000),
)
at_parser.add_argument("--seed", help="Random seed. Default 0.", type=int, default=0)
at_parser.add_argument("--out", help="Output directory.", type=str, required=True)
at_parser.set_defaults(func=attack)


def report(cli_args, runtime: RuntimeConfig):
    out = Path(cli_args.out)
    rows = []
    for run in cli_args.runs:
        rows.extend(read_results(Path(run) / RESULTS))
    summary = summarise(rows)

    manifest = _manifest(
        cli_args, "report", [], cli_args.runs, [str(out / "summary.csv")]
    )
    out.mkdir(parents=True, exist_ok=True)
    write_summary(out / "summary.csv", summary)
    write_chart(out / "chart.svg", summary)
    Console().print(summary_table(summary))

    if cli_args.images:
        for i, run in enumerate(cli_args.runs):
            _, records = data.load_records(Path(run) / PERTURBATIONS, "perturbations")
            for r in records:
                dump_images(
                    out / "images" / f"run{i:03d}",
                    r.id,
                    r.arrays["baseline"],
                    r.arrays["attacked"],
                )

    manifest.finish()
    manifest.write(out)
    log.info("Reported runs", num_runs=len(cli_args.runs), num_rows=len(rows))


rp_parser = subparsers.add_parser(
    "report",
    help="Summarise attack runs.",
)
rp_parser.add_argument("runs", help="Attack run directories.", nargs="*")
rp_parser.add_argument(
    "--images",
    help="Write baseline, attacked and difference images as 16-bit graymaps.",
    action="store_true",
)
rp_parser.add_argument("--out", help="Output directory.", type=str, required=True)
rp_parser.set_defaults(func=report)

log = structlog.get_logger("main")


def run(argv=None) -> int:
    """Run the command line, returning an exit code."""
    args = parser.parse_args(argv)
    configure_logging(
        config_file=args.log_config,
        debug=args.debug,
        verbose=args.verbose,
        colour=args.colour,
        json=args.json,
    )

    if args.version:
        print(version())
        return ExitCode.SUCCESS
    if not hasattr(args, "func"):
        parser.error("a sub-command is required")
    if args.func is report and not args.runs:
        rp_parser.error("at least one run directory is required")

    try:
        if args.config is not None:
            file_config = RuntimeConfig.from_file(args.config, CONFIG_SECTION)
            runtime = RuntimeConfig(
                args.workers or file_config.workers,
                args.precision or file_config.precision.value,
            )
        else:
            runtime = RuntimeConfig(args.workers, args.precision)
        log.debug("Runtime configuration", config=repr(runtime))

        args.func(args, runtime)
    except NumericalError as e:
        log.error(e.message, step=e.step, epoch=e.epoch)
        return ExitCode.NUMERICAL
    except DataFormatError as e:
        log.error(e.message, path=e.path, record=e.record, code=e.code)
        return ExitCode.DATA
    except MissingModelError as e:
        log.error(e.message, path=e.path, acceleration=e.acceleration)
        return ExitCode.DATA
    except OSError as e:
        log.error(str(e))
        return ExitCode.DATA
    except (ValueError, WorkbenchError) as e:
        log.error(str(e))
        return ExitCode.USAGE

    return ExitCode.SUCCESS


def main():
    sys.exit(run())
