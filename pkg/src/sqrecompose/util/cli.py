""" sqrecompose.util.cli: CLI handling

Defines main entrypoint for sqrecompose and sets up parsers for the fit, render, eval, gen and sweep commands.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict

from sqrecompose.common.error import SqRecomposeException
from sqrecompose.common.utils import configure_threads
from sqrecompose.constants import THREADS_ENV
from sqrecompose.evaluation.metrics import DEFAULT_POINTS, DEFAULT_RESOLUTION
from sqrecompose.fit.settings import FitConfig, IniSettings
from sqrecompose.model.types import NonFiniteGradient
from sqrecompose.synth.generator import CAP_PRESETS, GenSpec
from sqrecompose.util.commands import SWEEP_PARAMS, run_eval, run_fit, run_gen, run_render, run_sweep, sweep_values
from sqrecompose.util.help_text import HelpText

EXIT_INVALID = 2
EXIT_NUMERIC = 3

LOG_FORMAT = "[%(levelname)s] %(message)s"


def utility_entry(args) -> int:
    """Entrypoint for sqrecompose, returns the process exit code"""
    parsed, parser, runners = parse_args(args)
    logging.basicConfig(level=logging.DEBUG if parsed.verbose else logging.INFO, format=LOG_FORMAT, force=True)
    try:
        configure_threads(parsed.threads)
        settings = IniSettings.load(parsed.settings)
        return runners[parsed.command](parsed, settings)
    except NonFiniteGradient as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SqRecomposeException, OSError, ValueError) as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
    return EXIT_INVALID


def add_fit_arguments(parser: argparse.ArgumentParser):
    """Flags overriding FitConfig, shared by fit and sweep"""
    defaults = FitConfig()
    group = parser.add_argument_group("fit settings (defaults from settings.ini, else the values shown)")
    group.add_argument("--k", type=int, default=None,
                       help=f"Number of superquadrics K. Default: {defaults.max_superquadrics}")
    group.add_argument("--lambda", dest="lam", type=float, default=None,
                       help=f"Weight of the background rays in the objective. Default: {defaults.lam}")
    group.add_argument("--steps", type=int, default=None,
                       help=f"Optimization steps per superquadric. Default: {defaults.steps_per_iter}")
    group.add_argument("--rays", type=int, default=None,
                       help=f"Rays sampled per view and step. Default: {defaults.rays_per_view}")
    group.add_argument("--image-size", dest="image_size", type=int, default=None,
                       help=f"Longer mask side after resizing, 0 keeps native. Default: {defaults.image_size}")
    group.add_argument("--grid", type=int, default=None,
                       help=f"Error grid resolution N (N^3 vertices). Default: {defaults.grid_resolution}")
    group.add_argument("--sigma", type=float, default=None,
                       help=f"Gaussian smoothing of the error grid in voxels. Default: {defaults.smoothing_sigma}")
    group.add_argument("--gamma", type=float, default=None,
                       help=f"Density slope at the start of every optimization phase. Default: {defaults.gamma_opt}")
    group.add_argument("--no-anneal", dest="gamma_anneal", action="store_const", const=False, default=None,
                       help="Keep the optimization density slope fixed instead of raising it to the render slope")
    group.add_argument("--samples", type=int, default=None,
                       help=f"Stratified samples per ray. Default: {defaults.samples_per_ray}")
    group.add_argument("--lr-start", dest="lr_start", type=float, default=None,
                       help=f"Initial learning rate. Default: {defaults.lr_start}")
    group.add_argument("--lr-end", dest="lr_end", type=float, default=None,
                       help=f"Final learning rate. Default: {defaults.lr_end}")
    group.add_argument("--early-stop", dest="early_stop", type=float, default=None,
                       help="Stop adding superquadrics when the error peak falls below this value. "
                            f"Default: {defaults.early_stop_threshold} (disabled)")
    group.add_argument("--seed", type=int, default=None, help=f"Fit seed. Default: {defaults.seed}")
    group.add_argument("--sco", default=False, action="store_true",
                       help="Seed all superquadrics at once and optimize them jointly")


def add_metric_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION,
                        help="Occupancy grid resolution M for IoU. Default: %(default)s")
    parser.add_argument("--points", type=int, default=DEFAULT_POINTS,
                        help="Surface points per shape for Chamfer-L1. Default: %(default)s")


def add_command_parsers(
    subparsers, common: argparse.ArgumentParser, help_text: "HelpText"
) -> Dict[str, Callable]:
    """Adds in CLI parsers for the sqrecompose commands

    Args:
        subparsers: subparsers used to create new CLI subparsers
        common: common parent parser
        help_text: help text lookup

    Returns:
        Dictionary associating command name to callable used to process it
    """

    def add_parser(name):
        return subparsers.add_parser(
            name,
            description=help_text.long(name),
            help=help_text.short(name),
            parents=[common],
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )

    fit_parser = add_parser("fit")
    fit_parser.add_argument("bundle", type=Path, help="Scene bundle directory or manifest")
    fit_parser.add_argument("--out", type=Path, required=True, help="Output directory")
    fit_parser.add_argument("--views", type=int, default=None, help="Use only the first n views. Default: all")
    fit_parser.add_argument("--dump-grids", dest="dump_grids", default=False, action="store_true",
                            help="Write every iteration's error grid as raw float32 with a JSON header")
    fit_parser.add_argument("--log-every", dest="log_every", type=int, default=50,
                            help="Log the loss every n steps, 0 disables. Default: %(default)s")
    add_fit_arguments(fit_parser)

    render_parser = add_parser("render")
    render_parser.add_argument("composition", type=Path, help="Composition file")
    render_parser.add_argument("bundle", type=Path, help="Scene bundle providing the cameras")
    render_parser.add_argument("--out", type=Path, required=True, help="Output directory")
    render_parser.add_argument("--mesh", default=False, action="store_true", help="Also write an OBJ mesh")
    render_parser.add_argument("--mesh-density", dest="mesh_density", type=int, default=64,
                               help="Longitude segments of the mesh. Default: %(default)s")
    render_parser.add_argument("--gamma", dest="render_gamma", type=float, default=None,
                               help=f"Density slope of the renders. Default: {FitConfig().gamma_eval}")
    render_parser.add_argument("--image-size", dest="image_size", type=int, default=None,
                               help="Longer image side, 0 keeps the camera size. "
                                    f"Default: {FitConfig().image_size}")
    render_parser.add_argument("--samples", type=int, default=None,
                               help=f"Stratified samples per ray. Default: {FitConfig().samples_per_ray}")
    render_parser.add_argument("--seed", type=int, default=None,
                               help=f"Jitter seed. Default: {FitConfig().seed}")

    eval_parser = add_parser("eval")
    eval_parser.add_argument("composition", type=Path, help="Fitted composition file")
    eval_parser.add_argument("reference", type=Path, help="Reference composition file")
    eval_parser.add_argument("--report", type=Path, default=None, help="Also write the report to this file")
    eval_parser.add_argument("--bundle", type=Path, default=None, help="Take the scene bounds from this bundle")
    eval_parser.add_argument("--radius", type=float, default=1.0,
                             help="Scene radius when no bundle is given. Default: %(default)s")
    eval_parser.add_argument("--seed", type=int, default=0, help="Surface sampling seed. Default: %(default)s")
    add_metric_arguments(eval_parser)

    gen_defaults = GenSpec()
    gen_parser = add_parser("gen")
    gen_parser.add_argument("out", type=Path, help="Output bundle directory")
    gen_parser.add_argument("--views", type=int, default=None, help=f"Number of views. Default: {gen_defaults.views}")
    gen_parser.add_argument("--count", type=int, default=None,
                            help=f"Number of superquadrics. Default: drawn from {gen_defaults.count_range}")
    gen_parser.add_argument("--seed", type=int, default=None, help=f"Scene seed. Default: {gen_defaults.seed}")
    gen_parser.add_argument("--cap-deg", dest="cap_deg", type=float, default=None,
                            help="Restrict cameras to a spherical cap of this half-angle around +z "
                                 f"(presets {', '.join(str(cap) for cap in CAP_PRESETS)}). Default: full sphere")
    gen_parser.add_argument("--noise", type=float, default=None,
                            help=f"Per-pixel mask flip probability. Default: {gen_defaults.mask_noise}")
    gen_parser.add_argument("--image-size", dest="image_size", type=int, default=None,
                            help=f"Square mask size. Default: {gen_defaults.image_size}")
    gen_parser.add_argument("--disjoint", default=False, action="store_true",
                            help="Reject superquadrics that overlap each other")

    sweep_parser = add_parser("sweep")
    sweep_parser.add_argument("bundle", type=Path, help="Scene bundle directory")
    sweep_parser.add_argument("--param", choices=SWEEP_PARAMS, required=True, help="Setting to sweep")
    sweep_parser.add_argument("--values", nargs="+", required=True, help="Values of the swept setting")
    sweep_parser.add_argument("--out", type=Path, required=True, help="Output CSV file")
    add_fit_arguments(sweep_parser)
    add_metric_arguments(sweep_parser)
    return {
        "fit": run_fit,
        "render": run_render,
        "eval": run_eval,
        "gen": run_gen,
        "sweep": run_sweep,
    }


def validate(parsed):
    """Checks arguments argparse cannot check on its own, converting sweep values in place"""
    if not hasattr(parsed, "command") or parsed.command is None:
        raise ArgValidationException("'sqrecompose' not supplied sub-command argument")
    if getattr(parsed, "threads", None) is not None and parsed.threads < 1:
        raise ArgValidationException("'--threads' must be at least 1")
    if parsed.command == "fit" and parsed.views is not None and parsed.views < 1:
        raise ArgValidationException("'--views' must be at least 1")
    if parsed.command == "sweep":
        if parsed.param == "k" and parsed.k is not None:
            raise ArgValidationException("'--k' conflicts with sweeping 'k'")
        if parsed.param == "lambda" and parsed.lam is not None:
            raise ArgValidationException("'--lambda' conflicts with sweeping 'lambda'")
        try:
            parsed.values = sweep_values(parsed.param, parsed.values)
        except ValueError as exc:
            raise ArgValidationException(f"Invalid sweep values: {exc}") from exc
    if parsed.command == "eval" and parsed.bundle is not None and parsed.radius != 1.0:
        raise ArgValidationException("'--radius' conflicts with '--bundle'")


def parse_args(args):
    """
    Parse the arguments to the CLI. This will then enable the user to run the above listed commands via the commands.
    :param args: CLI arguments to process
    :return: parsed arguments in a Namespace, the main parser and the command runners
    """
    # Common parser specifying common arguments input into the utility
    common_parser = argparse.ArgumentParser(description="Common Parser for Common Ingredients.", add_help=False)
    common_parser.add_argument(
        "-v",
        "--verbose",
        default=False,
        action="store_true",
        help="Turn on verbose output.",
    )
    common_parser.add_argument(
        "--settings",
        type=Path,
        default=None,
        help=f"Settings file. Default: ${IniSettings.SET_ENV}, else ./{IniSettings.DEF_FILE}",
    )
    common_parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"Cap the worker thread pool. Default: ${THREADS_ENV}, else the torch default",
    )

    # Main parser for the whole application
    parser = argparse.ArgumentParser(
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=HelpText.long("global_help"),
    )
    subparsers = parser.add_subparsers(description=HelpText.long("subparsers_description"), dest="command")
    runners = add_command_parsers(subparsers, common_parser, HelpText)

    parsed = parser.parse_args(args)
    try:
        validate(parsed)
    except ArgValidationException as exc:
        print(f"[ERROR] {exc}", end="\n\n", file=sys.stderr)
        parser.print_usage(sys.stderr)
        sys.exit(EXIT_INVALID)
    return parsed, parser, runners


class ArgValidationException(Exception):
    """An exception used for argument validation"""
