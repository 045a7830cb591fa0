""" sqrecompose.model.objective: silhouette reconstruction loss and importance ray sampling

The loss is a sum (not a mean) of squared silhouette residuals over a batch of rays. The weighted form uses weight
lambda on background rays (target below one 8-bit quantization level) and 1 - lambda on object rays.

Rays are drawn per view with probability proportional to an exponential moving average of the squared error each pixel
produced when it was last sampled, plus a floor that keeps every pixel selectable.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch

from sqrecompose.constants import DTYPE, MASK_EPS
from .camera import CameraView, RayBundle, SceneBounds, pixel_rays
from .render import RenderConfig, render_bundle
from .superquadric import Composition
from .types import InvalidRayBatch

LOGGER = logging.getLogger(__name__)

EMA_DECAY = 0.9
FLOOR_FRACTION = 1e-3


@dataclass
class RayBatch:
    """Rays with their silhouette targets

    sources holds, for every ray, the position of its view in the view list the batch was drawn from.
    """

    rays: RayBundle
    targets: np.ndarray
    sources: np.ndarray

    def __len__(self):
        return len(self.rays)

    def take(self, index) -> "RayBatch":
        return RayBatch(self.rays.take(index), self.targets[index], self.sources[index])

    @classmethod
    def from_views(
        cls,
        views: Sequence[CameraView],
        pixels: Sequence[np.ndarray],
        bounds: SceneBounds = SceneBounds(),
    ) -> "RayBatch":
        """Batch of the given flat pixel indices of every view"""
        bundles, targets, sources = [], [], []
        for position, (view, pixel_ids) in enumerate(zip(views, pixels)):
            pixel_ids = np.asarray(pixel_ids, dtype=np.int64)
            bundles.append(pixel_rays(view, pixel_ids, bounds))
            targets.append(view.silhouette.reshape(-1)[pixel_ids])
            sources.append(np.full(pixel_ids.shape, position, dtype=np.int64))
        if not bundles:
            raise InvalidRayBatch("A ray batch requires at least one view")
        return cls(
            RayBundle.concatenate(bundles),
            np.concatenate(targets),
            np.concatenate(sources),
        )

    @classmethod
    def full(
        cls, views: Sequence[CameraView], bounds: SceneBounds = SceneBounds()
    ) -> "RayBatch":
        """Every pixel of every view"""
        return cls.from_views(views, [np.arange(view.pixel_count) for view in views], bounds)


class ImportanceTable:
    """Per-view, per-pixel sampling weights (EMA of realized squared errors)

    A fresh table is uniform. The first error observed at a pixel replaces its initial weight and later errors are
    blended in with the moving average. Pixels that were never sampled are weighted with the mean weight of the sampled
    pixels of their view. The table has a single writer: update is called between optimization steps.
    """

    def __init__(
        self,
        views: Sequence[CameraView],
        decay: float = EMA_DECAY,
        floor_fraction: float = FLOOR_FRACTION,
    ):
        if not 0.0 <= decay < 1.0:
            raise ValueError(f"decay must lie in [0, 1), got {decay}")
        if not floor_fraction > 0:
            raise ValueError(f"floor_fraction must be positive, got {floor_fraction}")
        self.decay = decay
        self.floor_fraction = floor_fraction
        self.weights: List[np.ndarray] = [
            np.ones(view.pixel_count, dtype=np.float64) for view in views
        ]
        self.visited: List[np.ndarray] = [
            np.zeros(view.pixel_count, dtype=bool) for view in views
        ]

    def effective_weights(self, position: int) -> np.ndarray:
        """Stored weights of sampled pixels, the mean of those for pixels never sampled"""
        weights, visited = self.weights[position], self.visited[position]
        if visited.all() or not visited.any():
            return weights
        return np.where(visited, weights, weights[visited].mean())

    def floor(self, position: int) -> float:
        return self.floor_fraction * float(self.effective_weights(position).mean())

    def probabilities(self, position: int) -> np.ndarray:
        """Selection probability of every pixel of a view, proportional to weight + floor"""
        weights = self.effective_weights(position)
        floor = self.floor(position)
        if floor <= 0:
            return np.full(weights.shape, 1.0 / weights.size)
        boosted = weights + floor
        return boosted / boosted.sum()

    def update(self, batch: RayBatch, ray_losses: np.ndarray):
        """Blend the realized per-ray squared errors into the weights of the sampled pixels"""
        ray_losses = np.asarray(ray_losses, dtype=np.float64)
        for position in np.unique(batch.sources):
            selected = batch.sources == position
            pixels = batch.rays.pixel_ids[selected]
            weights, visited = self.weights[position], self.visited[position]
            blended = self.decay * weights[pixels] + (1.0 - self.decay) * ray_losses[selected]
            weights[pixels] = np.where(visited[pixels], blended, ray_losses[selected])
            visited[pixels] = True


def sample_rays(
    views: Sequence[CameraView],
    n_per_view: int,
    table: Optional[ImportanceTable],
    rng: np.random.Generator,
    bounds: SceneBounds = SceneBounds(),
) -> RayBatch:
    """Draw n_per_view pixels of every view (with replacement) following the importance table

    A table of None samples uniformly.
    """
    if n_per_view < 1:
        raise ValueError(f"n_per_view must be at least 1, got {n_per_view}")
    pixels = []
    for position, view in enumerate(views):
        probabilities = None if table is None else table.probabilities(position)
        pixels.append(rng.choice(view.pixel_count, size=n_per_view, p=probabilities))
    return RayBatch.from_views(views, pixels, bounds)


def ray_weights(targets: np.ndarray, lam: float, mask_eps: float = MASK_EPS) -> np.ndarray:
    """w = lambda on background rays (target < mask_eps), 1 - lambda otherwise"""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    targets = np.asarray(targets, dtype=np.float64)
    return np.where(targets < mask_eps, lam, 1.0 - lam)


def weighted_square_errors(
    rendered: torch.Tensor, targets: torch.Tensor, weights: torch.Tensor
) -> torch.Tensor:
    """w (D - I)^2 per ray"""
    return weights * (rendered - targets) ** 2


def _check(batch: RayBatch):
    if len(batch) == 0:
        raise InvalidRayBatch("Loss requires a non-empty ray batch")


def unweighted_loss(batch: RayBatch, composition: Composition, config: RenderConfig) -> float:
    """sum_r (D(r, S) - I(r))^2"""
    _check(batch)
    rendered = render_bundle(batch.rays, composition, config)
    return float(np.sum((rendered - batch.targets) ** 2))


def weighted_loss(
    batch: RayBatch, composition: Composition, config: RenderConfig, lam: float
) -> float:
    """sum_r w_lambda(r) (D(r, S) - I(r))^2"""
    _check(batch)
    rendered = torch.as_tensor(render_bundle(batch.rays, composition, config), dtype=DTYPE)
    errors = weighted_square_errors(
        rendered,
        torch.as_tensor(batch.targets, dtype=DTYPE),
        torch.as_tensor(ray_weights(batch.targets, lam), dtype=DTYPE),
    )
    return float(errors.sum())
