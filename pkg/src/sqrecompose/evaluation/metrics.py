""" sqrecompose.evaluation.metrics: volumetric IoU and Chamfer-L1 between compositions

IoU compares hard occupancy grids: a cell is occupied when its center lies strictly inside (f < 1) at least one
superquadric. Chamfer-L1 is 0.5 (mean_a min_b |a - b| + mean_b min_a |b - a|) with Euclidean point distances over
points sampled on the surface of the union of superquadrics.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import torch
from scipy.spatial import KDTree

from sqrecompose.constants import DTYPE
from sqrecompose.model.camera import SceneBounds
from sqrecompose.model.render import iter_chunks
from sqrecompose.model.superquadric import Composition, surface_point, transformed_implicit
from sqrecompose.model.types import EmptyComposition
from .types import EmptyPointSet, GridMismatch

LOGGER = logging.getLogger(__name__)

INSIDE_TOLERANCE = 1e-6
SURFACE_CELLS = 64
DEFAULT_RESOLUTION = 64
DEFAULT_POINTS = 100_000
MAX_SAMPLING_ROUNDS = 100


@dataclass
class OccupancyGrid:
    """M^3 boolean cells of edge spacing, cell [i, j, k] centered at center - half + (index + 0.5) spacing"""

    resolution: int
    center: np.ndarray
    spacing: float
    occupied: np.ndarray

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError(f"Occupancy resolution must be at least 2, got {self.resolution}")
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.occupied = np.asarray(self.occupied, dtype=bool)

    def cell_centers(self) -> np.ndarray:
        axis = (np.arange(self.resolution) + 0.5) * self.spacing - 0.5 * self.resolution * self.spacing
        mesh = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1)
        return self.center + mesh

    def fraction(self) -> float:
        return float(self.occupied.mean())


def min_implicit(composition: Composition, points: np.ndarray, chunk: int = 65536) -> np.ndarray:
    """Smallest f over all superquadrics at world points [P, 3] (inf for an empty composition)"""
    result = np.full(points.shape[0], np.inf)
    if len(composition) == 0:
        return result
    raw = composition.raw_tensor()
    with torch.no_grad():
        for part in iter_chunks(points.shape[0], chunk):
            values = transformed_implicit(torch.as_tensor(points[part], dtype=DTYPE), raw, composition.bounds)
            result[part] = values.min(0).values.numpy()
    return result


def voxelize(
    composition: Composition,
    resolution: int = DEFAULT_RESOLUTION,
    bounds: SceneBounds = SceneBounds(),
    half_extent: Optional[float] = None,
) -> OccupancyGrid:
    """Hard occupancy of the cube of half-width half_extent (default: scene radius) around the scene center"""
    half_extent = bounds.radius if half_extent is None else half_extent
    grid = OccupancyGrid(
        resolution,
        bounds.center_array,
        2.0 * half_extent / resolution,
        np.zeros((resolution,) * 3, dtype=bool),
    )
    values = min_implicit(composition, grid.cell_centers().reshape(-1, 3))
    grid.occupied = (values < 1.0).reshape(grid.occupied.shape)
    return grid


def iou(first: OccupancyGrid, second: OccupancyGrid) -> float:
    """|a and b| / |a or b|, 1 when both grids are empty

    Raises:
        GridMismatch: grids differ in resolution or placement
    """
    if (
        first.resolution != second.resolution
        or not np.isclose(first.spacing, second.spacing)
        or not np.allclose(first.center, second.center)
    ):
        raise GridMismatch(
            f"Cannot compare a {first.resolution}^3 grid (spacing {first.spacing:.4g}) with a "
            f"{second.resolution}^3 grid (spacing {second.spacing:.4g})"
        )
    union = np.count_nonzero(first.occupied | second.occupied)
    if union == 0:
        return 1.0
    return np.count_nonzero(first.occupied & second.occupied) / union


def _cell_areas(composition: Composition, cells: int):
    eta = np.linspace(-0.5 * np.pi, 0.5 * np.pi, cells + 1)
    omega = np.linspace(-np.pi, np.pi, 2 * cells + 1)
    areas = []
    for params in composition:
        corners = surface_point(params, eta[:, None], omega[None, :])
        p00, p10 = corners[:-1, :-1], corners[1:, :-1]
        p01, p11 = corners[:-1, 1:], corners[1:, 1:]
        area = 0.5 * (
            np.linalg.norm(np.cross(p10 - p00, p11 - p00), axis=-1)
            + np.linalg.norm(np.cross(p11 - p00, p01 - p00), axis=-1)
        )
        areas.append(area.reshape(-1))
    return eta, omega, np.stack(areas)


def sample_surface(
    composition: Composition, count: int, rng: np.random.Generator, cells: int = SURFACE_CELLS
) -> np.ndarray:
    """count points on the surface of the union of superquadrics

    Each superquadric's (eta, omega) parameter domain is split into cells drawn with probability proportional to their
    mapped surface area, points are drawn uniformly in parameter space inside a cell, and points strictly inside
    another superquadric are rejected.

    Raises:
        EmptyComposition: nothing to sample
    """
    if len(composition) == 0:
        raise EmptyComposition("Cannot sample the surface of an empty composition")
    if count < 1:
        raise ValueError(f"Point count must be at least 1, got {count}")
    eta, omega, areas = _cell_areas(composition, cells)
    probabilities = areas.reshape(-1) / areas.sum()
    per_primitive = areas.shape[1]
    accepted, total = [], 0
    for _ in range(MAX_SAMPLING_ROUNDS):
        draws = max(2 * (count - total), 1024)
        picks = rng.choice(probabilities.size, size=draws, p=probabilities)
        owner, cell = np.divmod(picks, per_primitive)
        row, column = np.divmod(cell, 2 * cells)
        eta_draw = eta[row] + rng.random(draws) * (eta[1] - eta[0])
        omega_draw = omega[column] + rng.random(draws) * (omega[1] - omega[0])
        points = np.empty((draws, 3))
        keep = np.ones(draws, dtype=bool)
        for index, params in enumerate(composition):
            mine = owner == index
            points[mine] = surface_point(params, eta_draw[mine], omega_draw[mine])
            others = Composition(
                [other for position, other in enumerate(composition) if position != index], composition.bounds
            )
            if len(others):
                keep[mine] = min_implicit(others, points[mine]) >= 1.0 - INSIDE_TOLERANCE
        accepted.append(points[keep])
        total += int(keep.sum())
        if total >= count:
            return np.concatenate(accepted)[:count]
    raise EmptyPointSet(f"Surface sampling accepted only {total} of {count} points")


def chamfer_l1(first: np.ndarray, second: np.ndarray) -> float:
    """0.5 (mean nearest distance first->second + mean nearest distance second->first)

    Raises:
        EmptyPointSet: either set has no points
    """
    first = np.asarray(first, dtype=np.float64).reshape(-1, 3)
    second = np.asarray(second, dtype=np.float64).reshape(-1, 3)
    if len(first) == 0 or len(second) == 0:
        raise EmptyPointSet("Chamfer distance needs two non-empty point sets")
    forward, _ = KDTree(second).query(first)
    backward, _ = KDTree(first).query(second)
    return 0.5 * (float(np.mean(forward)) + float(np.mean(backward)))


def evaluate(
    fitted: Composition,
    reference: Composition,
    resolution: int = DEFAULT_RESOLUTION,
    points: int = DEFAULT_POINTS,
    seed: int = 0,
    bounds: SceneBounds = SceneBounds(),
) -> Dict[str, Any]:
    """Evaluation report {iou, chamfer_l1, per_primitive_count}

    Both surfaces are sampled with generators seeded identically, so equal compositions score exactly 0. chamfer_l1 is
    None when either side is empty.
    """
    score = iou(voxelize(fitted, resolution, bounds), voxelize(reference, resolution, bounds))
    chamfer = None
    if len(fitted) and len(reference):
        chamfer = chamfer_l1(
            sample_surface(fitted, points, np.random.default_rng(seed)),
            sample_surface(reference, points, np.random.default_rng(seed)),
        )
    LOGGER.debug("IoU %.4f, Chamfer-L1 %s", score, chamfer)
    return {
        "iou": float(score),
        "chamfer_l1": chamfer,
        "per_primitive_count": {"fitted": len(fitted), "reference": len(reference)},
    }
