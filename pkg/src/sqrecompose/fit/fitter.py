""" sqrecompose.fit.fitter: iterative and joint recomposition of silhouettes into superquadrics

fit_isco adds one superquadric at a time: it seeds a sphere where the error grid of the current composition asks for
more density, then optimizes all parameters of the composition jointly. fit_sco seeds all superquadrics at once from the
error grid of the empty scene and optimizes them jointly for the same total number of steps.

Both loops share one cosine learning-rate schedule over the whole run. The density slope restarts at gamma_opt with
every optimization phase and, unless disabled, rises to gamma_eval by its last step. Rays are redrawn every step from
the importance table, and every step renders with its own jitter seed derived from the fit seed, so a run is
reproducible.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from sqrecompose.common.utils import derive_seed
from sqrecompose.model.camera import CameraView, SceneBounds
from sqrecompose.model.gradients import evaluate_batch
from sqrecompose.model.objective import ImportanceTable, sample_rays
from sqrecompose.model.superquadric import Composition
from .optim import AdamState, adam_step, annealed_gamma, cosine_lr
from .seeder import (
    VoxelGrid,
    eval_grid_density,
    grid_error_gradient,
    grid_radius_from_cameras,
    has_object_pixels,
    propose_init,
    propose_inits,
    smoothed_descent_field,
)
from .settings import FitConfig
from .types import DegenerateErrorField, EmptySilhouettes

LOGGER = logging.getLogger(__name__)

RAY_STREAM = 11
JITTER_STREAM = 12
GRID_RAY_STREAM = 13
GRID_JITTER_STREAM = 14


@dataclass
class StepRecord:
    """One optimization step"""

    iteration: int
    step: int
    loss: float
    lr: float
    gamma: float

    def to_jsonable(self):
        return {"iter": self.iteration, "step": self.step, "loss": self.loss, "lr": self.lr, "gamma": self.gamma}


@dataclass
class FitTrace:
    """History of a fit

    snapshots[k] is the composition at the end of iteration k + 1 (ISCO: k + 1 superquadrics). grid_maxima holds the
    peak of the smoothed error field computed at the start of every iteration.
    """

    snapshots: List[Composition] = field(default_factory=list)
    steps: List[StepRecord] = field(default_factory=list)
    grid_maxima: List[float] = field(default_factory=list)
    stopped_early: bool = False


ProgressCallback = Callable[[StepRecord], None]
GridCallback = Callable[[int, VoxelGrid], None]


class _Run:
    """State shared by the optimization steps of one fit"""

    def __init__(
        self,
        views: Sequence[CameraView],
        config: FitConfig,
        bounds: SceneBounds,
        progress: Optional[ProgressCallback],
    ):
        if not views or not has_object_pixels(views):
            raise EmptySilhouettes("No view contains any object pixel")
        self.views = list(views)
        self.config = config
        self.bounds = bounds
        self.progress = progress
        self.shape_bounds = config.shape_bounds(bounds.radius)
        self.adam = AdamState((config.adam_beta1, config.adam_beta2), config.adam_eps)
        self.table = ImportanceTable(self.views)
        self.trace = FitTrace()
        self.global_step = 0
        self.grid_radius = (
            grid_radius_from_cameras(self.views, bounds) if config.grid_from_cameras else bounds.radius
        )

    def error_grid(self, composition: Composition, iteration: int) -> VoxelGrid:
        """dL/dV of the object-ray loss of the composition, its density sampled at the evaluation slope"""
        config = self.config
        grid = VoxelGrid.enclosing(self.bounds, config.grid_resolution, self.grid_radius)
        density = eval_grid_density(composition, grid, config.gamma_eval)
        rng = np.random.default_rng(derive_seed(config.seed, GRID_RAY_STREAM, iteration))
        render = config.render_config(derive_seed(config.seed, GRID_JITTER_STREAM, iteration))
        return grid_error_gradient(density, self.views, config.rays_per_view, rng, render, self.bounds)

    def gamma(self, phase_step: int, steps: int) -> float:
        """Density slope of one step of an optimization phase"""
        config = self.config
        if not config.gamma_anneal:
            return config.gamma_opt
        return annealed_gamma(phase_step, steps, config.gamma_opt, config.gamma_eval)

    def optimize(self, composition: Composition, iteration: int, steps: int) -> Composition:
        config = self.config
        raw = composition.raw_matrix()
        for phase_step in range(steps):
            step = self.global_step
            lr = cosine_lr(step, config.total_steps, config.lr_start, config.lr_end)
            gamma = self.gamma(phase_step, steps)
            rng = np.random.default_rng(derive_seed(config.seed, RAY_STREAM, step))
            batch = sample_rays(self.views, config.rays_per_view, self.table, rng, self.bounds)
            render = config.render_config(derive_seed(config.seed, JITTER_STREAM, step), gamma)
            evaluation = evaluate_batch(batch, composition.with_raw_matrix(raw), render, config.lam)
            self.table.update(batch, (evaluation.rendered - batch.targets) ** 2)
            raw = adam_step(raw, evaluation.gradient.values, self.adam, lr)
            record = StepRecord(iteration, step, evaluation.loss, lr, gamma)
            self.trace.steps.append(record)
            if self.progress is not None:
                self.progress(record)
            self.global_step += 1
        return composition.with_raw_matrix(raw)


def _peak(error_grid: VoxelGrid, config: FitConfig) -> float:
    return float(smoothed_descent_field(error_grid, config.smoothing_sigma).max())


def fit_isco(
    views: Sequence[CameraView],
    config: FitConfig = FitConfig(),
    bounds: SceneBounds = SceneBounds(),
    progress: Optional[ProgressCallback] = None,
    on_error_grid: Optional[GridCallback] = None,
):
    """Iterative recomposition: seed at the error maximum, then optimize all superquadrics, K times

    Returns:
        (final Composition, FitTrace)

    Raises:
        EmptySilhouettes: no view contains object pixels
    """
    run = _Run(views, config, bounds, progress)
    composition = Composition(bounds=run.shape_bounds)
    for iteration in range(1, config.max_superquadrics + 1):
        error_grid = run.error_grid(composition, iteration)
        peak = _peak(error_grid, config)
        run.trace.grid_maxima.append(peak)
        if on_error_grid is not None:
            on_error_grid(iteration, error_grid)
        if peak < config.early_stop_threshold:
            LOGGER.info("Stopping after %d superquadrics: error peak %.3g below threshold", iteration - 1, peak)
            run.trace.stopped_early = True
            break
        try:
            seed = propose_init(
                error_grid, config.smoothing_sigma, bounds.radius, run.shape_bounds, config.init_radius_fraction
            )
        except DegenerateErrorField:
            if iteration == 1:
                raise
            LOGGER.info("Stopping after %d superquadrics: error grid is flat", iteration - 1)
            run.trace.stopped_early = True
            break
        LOGGER.info("Iteration %d: seeding at %s (error peak %.3g)", iteration, np.round(seed.translation, 3), peak)
        composition = run.optimize(composition.appended(seed), iteration, config.steps_per_iter)
        run.trace.snapshots.append(composition)
    return composition, run.trace


def fit_sco(
    views: Sequence[CameraView],
    config: FitConfig = FitConfig(),
    bounds: SceneBounds = SceneBounds(),
    progress: Optional[ProgressCallback] = None,
    on_error_grid: Optional[GridCallback] = None,
):
    """Joint baseline: seed all K superquadrics on the empty-scene error peaks and optimize them together

    Returns:
        (final Composition, FitTrace with a single snapshot)
    """
    run = _Run(views, config, bounds, progress)
    empty = Composition(bounds=run.shape_bounds)
    error_grid = run.error_grid(empty, 1)
    run.trace.grid_maxima.append(_peak(error_grid, config))
    if on_error_grid is not None:
        on_error_grid(1, error_grid)
    seeds = propose_inits(
        error_grid,
        config.max_superquadrics,
        config.smoothing_sigma,
        bounds.radius,
        run.shape_bounds,
        config.init_radius_fraction,
    )
    composition = run.optimize(Composition(seeds, run.shape_bounds), 1, config.total_steps)
    run.trace.snapshots.append(composition)
    return composition, run.trace
