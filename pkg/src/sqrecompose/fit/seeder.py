""" sqrecompose.fit.seeder: error-grid placement of new superquadrics

The current composition is sampled onto a dense voxel grid of densities V. The grid is then rendered as a volume, the
density at every marching sample being the trilinear interpolation

    K(p) = sum_g V_g prod_i max(0, 1 - |p_i - g_i| / l)

and the loss with lambda = 0 (object rays only) is differentiated with respect to every V_g. Voxels where adding
density reduces the loss have negative gradients. A new superquadric is seeded as a small sphere at the maximum of the
Gaussian-smoothed positive part of the descent direction, -dL/dV.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from scipy import ndimage

from sqrecompose.constants import DTYPE, MASK_EPS
from sqrecompose.model.camera import CameraView, SceneBounds
from sqrecompose.model.objective import RayBatch, ray_weights, sample_rays, weighted_square_errors
from sqrecompose.model.render import RenderConfig, accumulate, iter_chunks, march_samples
from sqrecompose.model.superquadric import (
    Composition,
    ShapeBounds,
    SuperquadricParams,
    soft_occupancy,
    transformed_implicit,
)
from .types import DegenerateErrorField

LOGGER = logging.getLogger(__name__)

CAMERA_DISTANCE_RATIO = 3.0
DEGENERATE_PEAK = 1e-12
GRID_CHUNK = 1024
INIT_RADIUS_FRACTION = 0.1


@dataclass
class VoxelGrid:
    """N^3 scalar field on voxel centers center + (index - (N - 1) / 2) * spacing, indexed [x, y, z]"""

    resolution: int
    center: np.ndarray
    spacing: float
    values: np.ndarray

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError(f"Grid resolution must be at least 2, got {self.resolution}")
        if not self.spacing > 0:
            raise ValueError(f"Grid spacing must be positive, got {self.spacing}")
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        shape = (self.resolution,) * 3
        if self.values is None:
            self.values = np.zeros(shape, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != shape:
            raise ValueError(f"Grid values have shape {self.values.shape}, expected {shape}")

    @classmethod
    def enclosing(
        cls, bounds: SceneBounds, resolution: int, radius: Optional[float] = None
    ) -> "VoxelGrid":
        """Zero grid whose extent (N - 1) l spans the diameter of the given (or scene) radius"""
        radius = bounds.radius if radius is None else radius
        return cls(resolution, bounds.center_array, 2.0 * radius / (resolution - 1), None)

    @property
    def origin(self) -> np.ndarray:
        """Center of voxel [0, 0, 0]"""
        return self.center - 0.5 * (self.resolution - 1) * self.spacing

    @property
    def extent(self) -> float:
        return (self.resolution - 1) * self.spacing

    def with_values(self, values: np.ndarray) -> "VoxelGrid":
        return VoxelGrid(self.resolution, self.center, self.spacing, values)

    def voxel_center(self, index: Sequence[int]) -> np.ndarray:
        return self.origin + np.asarray(index, dtype=np.float64) * self.spacing

    def centers(self) -> np.ndarray:
        """World coordinates of every voxel center, shape [N, N, N, 3]"""
        axis = np.arange(self.resolution, dtype=np.float64)
        mesh = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1)
        return self.origin + mesh * self.spacing


def grid_radius_from_cameras(
    views: Sequence[CameraView], bounds: SceneBounds, ratio: float = CAMERA_DISTANCE_RATIO
) -> float:
    """Grid half-extent derived from the mean camera distance to the scene center"""
    distances = [np.linalg.norm(view.center - bounds.center_array) for view in views]
    return float(np.mean(distances)) / ratio


def eval_grid_density(
    composition: Composition, grid: VoxelGrid, gamma: float, chunk: int = 65536
) -> VoxelGrid:
    """Composition density min(sum_k sigma_k, 1) at every voxel center"""
    centers = grid.centers().reshape(-1, 3)
    values = np.zeros(centers.shape[0], dtype=np.float64)
    if len(composition):
        raw = composition.raw_tensor()
        with torch.no_grad():
            for part in iter_chunks(centers.shape[0], chunk):
                implicit = transformed_implicit(
                    torch.as_tensor(centers[part], dtype=DTYPE), raw, composition.bounds
                )
                density = soft_occupancy(implicit, gamma).sum(0)
                values[part] = torch.clamp(density, max=1.0).numpy()
    return grid.with_values(values.reshape(grid.values.shape))


def trilinear(
    values: torch.Tensor, origin: np.ndarray, spacing: float, points: torch.Tensor
) -> torch.Tensor:
    """Trilinear resampling of a [N, N, N] tensor at world points [..., 3], zero outside the grid"""
    resolution = values.shape[0]
    position = (points - torch.as_tensor(origin, dtype=DTYPE)) / spacing
    base = torch.floor(position)
    fraction = position - base
    base = base.long()
    flat = values.reshape(-1)
    result = torch.zeros(points.shape[:-1], dtype=DTYPE)
    for corner in np.ndindex(2, 2, 2):
        offset = torch.as_tensor(corner, dtype=torch.long)
        index = base + offset
        inside = ((index >= 0) & (index < resolution)).all(-1)
        index = index.clamp(0, resolution - 1)
        weight = torch.prod(
            torch.where(offset.bool(), fraction, 1.0 - fraction), -1
        )
        linear = (index[..., 0] * resolution + index[..., 1]) * resolution + index[..., 2]
        result = result + torch.where(inside, weight * flat[linear], torch.zeros_like(weight))
    return result


def trilinear_sample(grid: VoxelGrid, point: Sequence[float]) -> float:
    """Interpolated grid value at one world point (0 outside the grid)"""
    with torch.no_grad():
        value = trilinear(
            torch.as_tensor(grid.values, dtype=DTYPE),
            grid.origin,
            grid.spacing,
            torch.as_tensor(np.asarray(point, dtype=np.float64).reshape(1, 3), dtype=DTYPE),
        )
    return float(value[0])


def grid_error_gradient(
    grid: VoxelGrid,
    views: Sequence[CameraView],
    rays_per_view: Optional[int],
    rng: Optional[np.random.Generator],
    config: RenderConfig,
    bounds: SceneBounds = SceneBounds(),
    chunk: int = GRID_CHUNK,
) -> VoxelGrid:
    """dL/dV_g of the object-ray loss of the rendered density grid

    Args:
        grid: density grid from eval_grid_density
        views: calibrated views with silhouettes
        rays_per_view: uniformly drawn rays per view, None renders every pixel
        rng: generator drawing the rays (unused when rendering every pixel)
        config: marching settings (gamma is unused, the grid holds densities)
        bounds: scene bounding sphere clipping the rays
    """
    if rays_per_view is None:
        batch = RayBatch.full(views, bounds)
    else:
        batch = sample_rays(views, rays_per_view, None, rng, bounds)
    values = torch.tensor(grid.values, dtype=DTYPE, requires_grad=True)
    loss = _object_loss(values, grid, batch, config, chunk)
    LOGGER.debug("Error grid loss over %d rays: %.6g", len(batch), loss)
    if values.grad is None:
        return grid.with_values(np.zeros_like(grid.values))
    return grid.with_values(values.grad.numpy().copy())


def grid_object_loss(
    grid: VoxelGrid,
    views: Sequence[CameraView],
    config: RenderConfig,
    bounds: SceneBounds = SceneBounds(),
    chunk: int = GRID_CHUNK,
) -> float:
    """Object-ray loss of the rendered density grid over every pixel, the loss grid_error_gradient differentiates"""
    with torch.no_grad():
        values = torch.as_tensor(grid.values, dtype=DTYPE)
        return _object_loss(values, grid, RayBatch.full(views, bounds), config, chunk)


def _object_loss(
    values: torch.Tensor, grid: VoxelGrid, batch: RayBatch, config: RenderConfig, chunk: int
) -> float:
    targets = torch.as_tensor(batch.targets, dtype=DTYPE)
    weights = torch.as_tensor(ray_weights(batch.targets, 0.0), dtype=DTYPE)
    loss = 0.0
    for part in iter_chunks(len(batch), chunk):
        samples = march_samples(batch.rays.take(part), config)
        density = trilinear(values, grid.origin, grid.spacing, samples.points)
        rendered = accumulate(density, samples.optical_steps)
        chunk_loss = weighted_square_errors(rendered, targets[part], weights[part]).sum()
        if chunk_loss.requires_grad:
            chunk_loss.backward()
        loss += float(chunk_loss.detach())
    return loss


def smoothed_descent_field(error_grid: VoxelGrid, smoothing_sigma: float) -> np.ndarray:
    """Gaussian-smoothed positive part of -dL/dV"""
    if not np.all(np.isfinite(error_grid.values)):
        raise ValueError("Error grid contains non-finite values")
    descent = np.maximum(-error_grid.values, 0.0)
    if smoothing_sigma <= 0:
        return descent
    return ndimage.gaussian_filter(descent, smoothing_sigma, mode="constant", cval=0.0)


def _seed_sphere(
    grid: VoxelGrid, index: Sequence[int], scene_radius: float, bounds: ShapeBounds, fraction: float
) -> SuperquadricParams:
    return SuperquadricParams.sphere(grid.voxel_center(index), fraction * scene_radius, bounds)


def propose_init(
    error_grid: VoxelGrid,
    smoothing_sigma: float,
    scene_radius: float,
    bounds: Optional[ShapeBounds] = None,
    init_radius_fraction: float = INIT_RADIUS_FRACTION,
) -> SuperquadricParams:
    """Sphere at the voxel of strongest smoothed descent signal

    Raises:
        DegenerateErrorField: the field carries no descent signal
    """
    bounds = ShapeBounds.for_scene(scene_radius) if bounds is None else bounds
    field = smoothed_descent_field(error_grid, smoothing_sigma)
    peak = float(field.max())
    if peak <= DEGENERATE_PEAK:
        raise DegenerateErrorField(f"Error grid carries no descent signal (peak {peak:.3g})", peak)
    index = np.unravel_index(int(np.argmax(field)), field.shape)
    return _seed_sphere(error_grid, index, scene_radius, bounds, init_radius_fraction)


def find_peaks(field: np.ndarray, count: int, min_distance: float) -> List[Tuple[int, int, int]]:
    """Up to count strongest local maxima with positive value, greedily suppressing peaks within min_distance voxels"""
    maxima = (field == ndimage.maximum_filter(field, size=3, mode="constant")) & (field > DEGENERATE_PEAK)
    candidates = np.argwhere(maxima)
    order = np.argsort(-field[maxima], kind="stable")
    accepted: List[np.ndarray] = []
    for candidate in candidates[order]:
        if all(np.linalg.norm(candidate - other) > min_distance for other in accepted):
            accepted.append(candidate)
            if len(accepted) == count:
                break
    return [tuple(int(i) for i in peak) for peak in accepted]


def propose_inits(
    error_grid: VoxelGrid,
    count: int,
    smoothing_sigma: float,
    scene_radius: float,
    bounds: Optional[ShapeBounds] = None,
    init_radius_fraction: float = INIT_RADIUS_FRACTION,
) -> List[SuperquadricParams]:
    """count spheres on the non-max-suppressed peaks of the smoothed field (suppression radius 2 sigma)

    When fewer peaks than requested exist, the strongest ones are reused in order.
    """
    bounds = ShapeBounds.for_scene(scene_radius) if bounds is None else bounds
    field = smoothed_descent_field(error_grid, smoothing_sigma)
    peaks = find_peaks(field, count, 2.0 * smoothing_sigma)
    if not peaks:
        raise DegenerateErrorField(
            f"Error grid carries no descent signal (peak {float(field.max()):.3g})", float(field.max())
        )
    if len(peaks) < count:
        LOGGER.warning("Only %d distinct error peaks for %d superquadrics, reusing peaks", len(peaks), count)
    return [
        _seed_sphere(error_grid, peaks[i % len(peaks)], scene_radius, bounds, init_radius_fraction)
        for i in range(count)
    ]


def has_object_pixels(views: Sequence[CameraView]) -> bool:
    return any(np.any(view.silhouette >= MASK_EPS) for view in views)
