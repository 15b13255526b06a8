# -*- coding: utf-8 -*-
"""
Command line entry point

    stgcnn-inverse coarsen MESH [TARGETS]... --out FOLDER
    stgcnn-inverse gen-data --config CONFIG [--out DIR] [--seed N] [--jobs N]
    stgcnn-inverse train | eval | sweep | cross-geometry | gradcheck --config CONFIG ...
    stgcnn-inverse reconstruct CHECKPOINT Y_FILE --config CONFIG [--output X_FILE] [--truth X_FILE]

Exit codes: 0 success, 1 usage, 2 validation (ValueError family), 3 runtime.
On failure exactly one line goes to stderr:
    error<TAB><command><TAB><ErrorClass><TAB><message>
"""
import os
import sys
from contextlib import contextmanager
from typing import List, Optional

import click
from loguru import logger

from src.errors import GradientCheckError
from src.framework import ExperimentFramework, coarsen_mesh, config_from_file
from src.gradcheck import MODEL_ENTRIES
from src.helpers import make_folder

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
PROCEDURAL_SHAPES = ["ellipsoid", "icosahedron", "tetrahedron"]


@contextmanager
def run_log(folder: str):
    """ `run.log` sink in the output folder for the duration of a command """
    handler = logger.add(os.path.join(make_folder(folder), "run.log"), level="DEBUG")
    try:
        yield
    finally:
        logger.remove(handler)


def run_options(func):
    """ --config, --out, --seed and --jobs shared by the config-driven commands """
    func = click.option("--jobs", type=click.IntRange(min=1), default=None,
                        help="worker processes (overrides `jobs`)")(func)
    func = click.option("--seed", type=click.IntRange(min=0), default=None,
                        help="base seed (overrides `seed`)")(func)
    func = click.option("--out", type=click.Path(file_okay=False), default=None,
                        help="output folder (overrides `output_dir`)")(func)
    func = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                        default=None, help="YAML run config, cf. configs-example/")(func)
    return func


@contextmanager
def framework(config_path: Optional[str], out: Optional[str], seed: Optional[int],
              jobs: Optional[int]):
    config = config_from_file(config_path, seed=seed, output_dir=out, jobs=jobs)
    experiment = ExperimentFramework(config)
    with run_log(experiment.save_folder):
        experiment.echo_config()
        logger.info(f"[Config] {config_path or 'defaults'} -> {experiment.save_folder}")
        yield experiment


@click.group()
def cli():
    """ Geometry-dependent inverse imaging with spline graph convolutions """


@cli.command()
@click.argument("mesh")
@click.argument("targets", type=int, nargs=-1)
@click.option("--out", type=click.Path(file_okay=False), default="hierarchy",
              help="folder receiving level_<k>.mesh and map_<k>.bin")
def coarsen(mesh, targets, out):
    """ Build and save a mesh hierarchy; MESH is a file or a procedural shape name """
    if not os.path.exists(mesh) and mesh in PROCEDURAL_SHAPES:
        mesh = {"shape": mesh}
    with run_log(out):
        hierarchy = coarsen_mesh(mesh, list(targets), folder=out)
        click.echo(hierarchy.summary().to_string(index=False))


@cli.command("gen-data")
@run_options
def gen_data(config_path, out, seed, jobs):
    """ Simulate, project and store the dataset """
    with framework(config_path, out, seed, jobs) as experiment:
        experiment.generate_data()


@cli.command()
@run_options
@click.option("--resume", type=click.Path(exists=True, dir_okay=False), default=None,
              help="checkpoint to continue from")
def train(config_path, out, seed, jobs, resume):
    """ Train on the `train` split of the dataset """
    with framework(config_path, out, seed, jobs) as experiment:
        experiment.train(resume=resume)


@cli.command("eval")
@run_options
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--split", type=click.Choice(["train", "val", "test"]), default="test")
def eval_(config_path, out, seed, jobs, checkpoint, split):
    """ Standard evaluation on the training geometry """
    with framework(config_path, out, seed, jobs) as experiment:
        experiment.evaluate(checkpoint, split=split)


@cli.command()
@run_options
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--axis", type=click.Choice(["x", "y", "z"]), default=None)
@click.option("--degrees", type=float, multiple=True, help="repeat for every degree")
def sweep(config_path, out, seed, jobs, checkpoint, axis, degrees):
    """ Rotation sweep, one metric group per degree """
    with framework(config_path, out, seed, jobs) as experiment:
        experiment.sweep(checkpoint, axis=axis, degrees=list(degrees) if degrees else None)


@cli.command("cross-geometry")
@run_options
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False), required=False)
def cross_geometry(config_path, out, seed, jobs, checkpoint):
    """ Trained checkpoint applied to `eval.cross_geometry` """
    with framework(config_path, out, seed, jobs) as experiment:
        experiment.cross_geometry(checkpoint)


@cli.command()
@run_options
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument("y_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="X_hat tensor file (default <out>/reconstruction.X)")
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), default=None,
              help="true X tensor file, prints the CC")
def reconstruct(config_path, out, seed, jobs, checkpoint, y_file, output, truth):
    """ Heart signal from one torso tensor file """
    with framework(config_path, out, seed, jobs) as experiment:
        output = output or os.path.join(experiment.save_folder, "reconstruction.X")
        cc_value = experiment.reconstruct(checkpoint, y_file, output, x_path=truth)
        if cc_value is not None:
            click.echo(f"cc\t{cc_value:.6f}")


@cli.command()
@run_options
@click.option("--max-entries", type=click.IntRange(min=1), default=MODEL_ENTRIES,
              show_default=True,
              help="full-model check only: random entries sampled per parameter tensor "
                   "(operation checks always cover every entry)")
def gradcheck(config_path, out, seed, jobs, max_entries):
    """ Finite-difference check of every differentiable operation """
    with framework(config_path, out, seed, jobs) as experiment:
        table = experiment.gradcheck(max_entries=max_entries)
        click.echo(table.to_string(index=False))
        failed = table[~table.passed].operation.tolist()
        if failed:
            raise GradientCheckError(f"Gradient check failed for {', '.join(failed)}")


def _command_name(argv: List[str]) -> str:
    for arg in argv:
        if arg in cli.commands:
            return arg
    return "-"


def exit_code(error: BaseException) -> int:
    if isinstance(error, (click.ClickException, click.Abort)):
        return EXIT_USAGE
    if isinstance(error, ValueError):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def run(argv: Optional[List[str]] = None) -> int:
    """ Runs one command, returns the exit code instead of exiting """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        result = cli.main(args=argv, prog_name="stgcnn-inverse", standalone_mode=False)
    except Exception as error:  # pylint: disable=broad-except
        message = " ".join(str(error).split()) if not isinstance(error, click.ClickException) \
            else " ".join(error.format_message().split())
        click.echo(f"error\t{_command_name(argv)}\t{type(error).__name__}\t{message}", err=True)
        return exit_code(error)
    return result if isinstance(result, int) else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
