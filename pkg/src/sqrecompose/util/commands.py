""" sqrecompose.util.commands: command definitions of the sqrecompose command line

Every command takes the parsed namespace plus the loaded settings and returns the process exit code:
    - fit: fits a composition to a scene bundle
    - render: renders a composition for the cameras of a bundle
    - eval: compares two compositions
    - gen: writes a synthetic bundle with ground truth
    - sweep: repeats fits over the values of one setting
"""

import argparse
import csv
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from sqrecompose.assets.bundle import SceneBundle, load_bundle, manifest_path, resize_views, save_bundle, write_mask
from sqrecompose.assets.composition_io import load_composition, save_composition
from sqrecompose.assets.grid_dump import dump_grid
from sqrecompose.assets.mesh import export_mesh
from sqrecompose.evaluation.metrics import evaluate
from sqrecompose.fit.fitter import FitTrace, StepRecord, fit_isco, fit_sco
from sqrecompose.fit.optim import scale_lr_for_rays
from sqrecompose.fit.settings import FitConfig, merge_settings
from sqrecompose.model.camera import SceneBounds
from sqrecompose.model.render import render_image
from sqrecompose.model.superquadric import Composition
from sqrecompose.synth.generator import GenSpec, gen_bundle

LOGGER = logging.getLogger(__name__)

GROUND_TRUTH = "gt_composition.json"
SWEEP_PARAMS = ("lambda", "views", "k")


def fit_config_from(parsed: argparse.Namespace, settings: Dict[str, Any], **replace) -> FitConfig:
    """FitConfig from settings-file values with command-line flags applied on top

    When the ray budget is changed on the command line, learning rates that were not given explicitly are rescaled from
    the 500-ray calibration.
    """
    overrides = {
        "max_superquadrics": getattr(parsed, "k", None),
        "lam": getattr(parsed, "lam", None),
        "steps_per_iter": getattr(parsed, "steps", None),
        "rays_per_view": getattr(parsed, "rays", None),
        "image_size": getattr(parsed, "image_size", None),
        "grid_resolution": getattr(parsed, "grid", None),
        "smoothing_sigma": getattr(parsed, "sigma", None),
        "gamma_opt": getattr(parsed, "gamma", None),
        "gamma_anneal": getattr(parsed, "gamma_anneal", None),
        "samples_per_ray": getattr(parsed, "samples", None),
        "lr_start": getattr(parsed, "lr_start", None),
        "lr_end": getattr(parsed, "lr_end", None),
        "early_stop_threshold": getattr(parsed, "early_stop", None),
        "seed": getattr(parsed, "seed", None),
    }
    values = dict(settings["fit"])
    rays = overrides["rays_per_view"]
    if rays is not None:
        for key in ("lr_start", "lr_end"):
            if overrides[key] is None:
                overrides[key] = scale_lr_for_rays(values[key], rays)
    overrides.update(replace)
    return merge_settings(FitConfig, values, overrides)


def _load_views(bundle: SceneBundle, config: FitConfig, views: Optional[int]):
    selected = bundle.views if views is None else bundle.views[:views]
    return resize_views(selected, config.image_size)


def _run_fit(bundle: SceneBundle, config: FitConfig, sco: bool, views: Optional[int] = None, **callbacks):
    fitter = fit_sco if sco else fit_isco
    return fitter(_load_views(bundle, config, views), config, bundle.bounds, **callbacks)


def run_fit(parsed: argparse.Namespace, settings: Dict[str, Any]) -> int:
    """Fits the bundle and writes composition, snapshots, trace and optional grid dumps"""
    config = fit_config_from(parsed, settings)
    bundle = load_bundle(parsed.bundle)
    out = Path(parsed.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_jsonable(), indent=2) + "\n")

    def on_error_grid(iteration, grid):
        if parsed.dump_grids:
            dump_grid(grid, out / "grids" / f"iter_{iteration}")

    with open(out / "trace.jsonl", "w") as trace_file:

        def progress(record: StepRecord):
            trace_file.write(json.dumps(record.to_jsonable()) + "\n")
            if parsed.log_every and (record.step + 1) % parsed.log_every == 0:
                LOGGER.info("Iteration %d, step %d: loss %.5g, lr %.3g", record.iteration, record.step + 1,
                            record.loss, record.lr)

        start = time.perf_counter()
        composition, trace = _run_fit(
            bundle, config, parsed.sco, parsed.views, progress=progress, on_error_grid=on_error_grid
        )
    _write_snapshots(trace, out / "snapshots", parsed.sco)
    save_composition(composition, out / "composition.json")
    print(
        f"[INFO] Fitted {len(composition)} superquadrics in {time.perf_counter() - start:.1f}s, "
        f"written to {out / 'composition.json'}"
    )
    return 0


def _write_snapshots(trace: FitTrace, directory: Path, sco: bool):
    for index, snapshot in enumerate(trace.snapshots):
        number = len(snapshot) if sco else index + 1
        save_composition(snapshot, directory / f"iter_{number}.json")


def run_render(parsed: argparse.Namespace, settings: Dict[str, Any]) -> int:
    """Writes one 8-bit PNG per view and optionally an OBJ mesh"""
    config = fit_config_from(parsed, settings)
    composition = load_composition(parsed.composition)
    bundle = load_bundle(parsed.bundle, load_masks=False)
    out = Path(parsed.out)
    out.mkdir(parents=True, exist_ok=True)
    gamma = config.gamma_eval if parsed.render_gamma is None else parsed.render_gamma
    render = config.render_config(config.seed, gamma)
    for view in resize_views(bundle.views, config.image_size):
        write_mask(out / f"render_{view.view_id:03d}.png", render_image(view, composition, render, bundle.bounds))
    if parsed.mesh:
        if len(composition):
            export_mesh(composition, out / "composition.obj", parsed.mesh_density)
        else:
            print("[WARNING] Empty composition, no mesh written")
    print(f"[INFO] Rendered {len(bundle.views)} views to {out}")
    return 0


def _eval_bounds(parsed: argparse.Namespace) -> SceneBounds:
    if parsed.bundle is not None:
        return load_bundle(parsed.bundle, load_masks=False).bounds
    return SceneBounds((0.0, 0.0, 0.0), parsed.radius)


def run_eval(parsed: argparse.Namespace, _: Dict[str, Any]) -> int:
    """Prints the metrics report and writes it when a report path is given"""
    report = evaluate(
        load_composition(parsed.composition),
        load_composition(parsed.reference),
        parsed.resolution,
        parsed.points,
        parsed.seed,
        _eval_bounds(parsed),
    )
    text = json.dumps(report, indent=2)
    print(text)
    if parsed.report is not None:
        Path(parsed.report).parent.mkdir(parents=True, exist_ok=True)
        Path(parsed.report).write_text(text + "\n")
    return 0


def gen_spec_from(parsed: argparse.Namespace, settings: Dict[str, Any]) -> GenSpec:
    overrides = {
        "views": parsed.views,
        "count_range": None if parsed.count is None else (parsed.count, parsed.count),
        "seed": parsed.seed,
        "mask_noise": parsed.noise,
        "image_size": parsed.image_size,
        "disjoint": True if parsed.disjoint else None,
    }
    if parsed.cap_deg is not None:
        overrides.update(viewpoints="cap", cap_deg=parsed.cap_deg)
    return merge_settings(GenSpec, settings["gen"], overrides)


def run_gen(parsed: argparse.Namespace, settings: Dict[str, Any]) -> int:
    """Writes a synthetic bundle and its ground-truth composition"""
    spec = gen_spec_from(parsed, settings)
    bundle, scene = gen_bundle(spec)
    manifest = save_bundle(bundle, parsed.out)
    save_composition(scene, Path(parsed.out) / GROUND_TRUTH)
    print(f"[INFO] Wrote {len(bundle.views)} views of {len(scene)} superquadrics to {manifest}")
    return 0


def sweep_values(param: str, values: List[str]) -> List[float]:
    """Typed sweep values, raising ValueError for counts that are not positive integers"""
    if param == "lambda":
        return [float(value) for value in values]
    counts = [int(value) for value in values]
    if any(count < 1 for count in counts):
        raise ValueError(f"'{param}' values must be positive integers")
    return counts


def _sweep_point(param: str, value, parsed, settings, bundle, reference: Optional[Composition]) -> Tuple:
    replace = {"lam": value} if param == "lambda" else ({"max_superquadrics": value} if param == "k" else {})
    config = fit_config_from(parsed, settings, **replace)
    views = value if param == "views" else None
    start = time.perf_counter()
    composition, _ = _run_fit(bundle, config, parsed.sco, views)
    wall_time = time.perf_counter() - start
    if reference is None:
        return value, None, None, wall_time
    report = evaluate(composition, reference, parsed.resolution, parsed.points, config.seed, bundle.bounds)
    return value, report["iou"], report["chamfer_l1"], wall_time


def run_sweep(parsed: argparse.Namespace, settings: Dict[str, Any]) -> int:
    """Fits once per value and writes (value, iou, chamfer, wall_time) rows"""
    bundle = load_bundle(parsed.bundle)
    ground_truth = manifest_path(parsed.bundle).parent / GROUND_TRUTH
    reference = load_composition(ground_truth) if ground_truth.exists() else None
    if reference is None:
        print(f"[WARNING] No {GROUND_TRUTH} in {parsed.bundle}, metrics are left empty")
    out = Path(parsed.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(["value", "iou", "chamfer", "wall_time"])
        for value in parsed.values:
            row = _sweep_point(parsed.param, value, parsed, settings, bundle, reference)
            LOGGER.info("%s = %s: iou %s, chamfer %s, %.1fs", parsed.param, *row)
            writer.writerow(["" if item is None else item for item in row])
            csv_file.flush()
    print(f"[INFO] Wrote {len(parsed.values)} rows to {out}")
    return 0

