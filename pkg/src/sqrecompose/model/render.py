""" sqrecompose.model.render: differentiable silhouette rendering by ray marching

Each ray interval [t_near, t_far] is split into S equal bins and one sample is jittered uniformly inside every bin. The
interval ends and the samples are the nodes of the ray, and every gap between consecutive nodes is split further into m
equal substeps. Along each segment the implicit function f is interpolated linearly between its end nodes, and the
logistic density sigma = logistic(gamma (1 - f)) is integrated exactly over that interpolant:

    mean density = (softplus(z_b) - softplus(z_a)) / (z_b - z_a),    z = gamma (1 - f)

The optical depth of a segment of length delta is its mean density times delta / delta_ref, where
delta_ref = (t_far - t_near) / reference_samples. The opacity of one primitive is

    D = sum_i T_i (1 - exp(-tau_i)),    T_i = exp(-sum_{j<i} tau_j)

which telescopes to 1 - exp(-sum_i tau_i). A composition renders as min(sum_k D_k, 1), every primitive being marched
independently.

Densities that are not an implicit function along the ray (resampled voxel grids) are point-sampled at the stratified
samples instead, with optical depth sigma_i delta_i / delta_ref.
"""

from dataclasses import dataclass
from typing import Iterator

import numpy as np
import torch

from sqrecompose.common.utils import stratified_jitter
from sqrecompose.constants import DTYPE
from .camera import CameraView, Ray, RayBundle, SceneBounds, image_rays
from .superquadric import (
    Composition,
    ShapeBounds,
    SuperquadricParams,
    transformed_implicit,
)

DEFAULT_CHUNK = 2048

# below this change of the logistic argument a segment uses the curvature-corrected midpoint value
FLAT_SEGMENT = 1e-2


@dataclass(frozen=True)
class RenderConfig:
    """Ray-marching settings

    gamma: slope of the logistic density at the surface boundary
    samples_per_ray: stratified sample count
    seed: seed of the jitter stream
    reference_samples: sample count whose mean bin width normalizes the optical depth
    substeps: equal subdivisions of every gap between consecutive nodes
    """

    gamma: float = 150.0
    samples_per_ray: int = 96
    seed: int = 0
    reference_samples: int = 96
    substeps: int = 4

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.samples_per_ray < 2:
            raise ValueError(
                f"samples_per_ray must be at least 2, got {self.samples_per_ray}"
            )
        if self.reference_samples < 1:
            raise ValueError(
                f"reference_samples must be positive, got {self.reference_samples}"
            )
        if self.substeps < 1:
            raise ValueError(f"substeps must be at least 1, got {self.substeps}")


@dataclass
class MarchSamples:
    """Sample points of a ray bundle and the normalized step length delta_i / delta_ref of each sample"""

    points: torch.Tensor
    optical_steps: torch.Tensor


@dataclass
class MarchSegments:
    """Nodes [R, M + 1, 3] of a ray bundle and the normalized lengths delta / delta_ref [R, M] of the M segments"""

    nodes: torch.Tensor
    optical_lengths: torch.Tensor


def _sample_fractions(bundle: RayBundle, config: RenderConfig) -> np.ndarray:
    count = config.samples_per_ray
    jitter = stratified_jitter(config.seed, bundle.view_ids, bundle.pixel_ids, count)
    return (np.arange(count)[None, :] + jitter) / count


def _along(bundle: RayBundle, fractions: np.ndarray) -> torch.Tensor:
    span = bundle.t_far - bundle.t_near
    depths = bundle.t_near[:, None] + fractions * span[:, None]
    points = bundle.origins[:, None, :] + depths[..., None] * bundle.directions[:, None, :]
    return torch.as_tensor(points, dtype=DTYPE)


def _optical(bundle: RayBundle, fraction_steps: np.ndarray, config: RenderConfig) -> torch.Tensor:
    steps = fraction_steps * config.reference_samples
    steps = np.where((bundle.t_far > bundle.t_near)[:, None], steps, 0.0)
    return torch.as_tensor(steps, dtype=DTYPE)


def march_samples(bundle: RayBundle, config: RenderConfig) -> MarchSamples:
    """Stratified sample points [R, S, 3] and normalized steps [R, S] of a bundle"""
    fractions = _sample_fractions(bundle, config)
    following = np.concatenate([fractions[:, 1:], np.ones((len(bundle), 1))], axis=1)
    return MarchSamples(_along(bundle, fractions), _optical(bundle, following - fractions, config))


def march_segments(bundle: RayBundle, config: RenderConfig) -> MarchSegments:
    """Nodes and segment lengths of a bundle: interval ends plus stratified samples, each gap split into substeps"""
    rays = len(bundle)
    ends = np.concatenate(
        [np.zeros((rays, 1)), _sample_fractions(bundle, config), np.ones((rays, 1))], axis=1
    )
    start, gap = ends[:, :-1], np.diff(ends, axis=1)
    steps = np.arange(config.substeps) / config.substeps
    fractions = (start[..., None] + gap[..., None] * steps).reshape(rays, -1)
    fractions = np.concatenate([fractions, np.ones((rays, 1))], axis=1)
    return MarchSegments(
        _along(bundle, fractions), _optical(bundle, np.diff(fractions, axis=1), config)
    )


def accumulate(sigma: torch.Tensor, optical_steps: torch.Tensor) -> torch.Tensor:
    """Rendered opacity of densities [..., R, S] along rays, reduced over the last axis"""
    depth = sigma * optical_steps
    transmittance = torch.exp(-(torch.cumsum(depth, -1) - depth))
    return torch.sum(transmittance * -torch.expm1(-depth), -1)


def _softplus(value: torch.Tensor) -> torch.Tensor:
    return torch.logaddexp(value, torch.zeros_like(value))


def mean_logistic(start: torch.Tensor, end: torch.Tensor) -> torch.Tensor:
    """Mean of the logistic function over a segment along which its argument runs linearly from start to end"""
    change = end - start
    flat = change.abs() < FLAT_SEGMENT
    divisor = torch.where(flat, torch.ones_like(change), change)
    exact = (_softplus(end) - _softplus(start)) / divisor
    middle = torch.sigmoid(0.5 * (start + end))
    curvature = middle * (1.0 - middle) * (1.0 - 2.0 * middle)
    return torch.where(flat, middle + curvature * change.square() / 24.0, exact)


def primitive_opacity(
    segments: MarchSegments, raw: torch.Tensor, bounds: ShapeBounds, gamma: float
) -> torch.Tensor:
    """Per-primitive opacities [K, R]"""
    argument = gamma * (1.0 - transformed_implicit(segments.nodes, raw, bounds))
    density = mean_logistic(argument[..., :-1], argument[..., 1:])
    return -torch.expm1(-(density * segments.optical_lengths).sum(-1))


def composition_opacity(
    segments: MarchSegments, raw: torch.Tensor, bounds: ShapeBounds, gamma: float
) -> torch.Tensor:
    """Composition opacity min(sum_k D_k, 1) of every ray, shape [R]

    At a tie (sum exactly 1) the clamp passes the gradient through.
    """
    if raw.shape[0] == 0:
        return torch.zeros(segments.nodes.shape[0], dtype=DTYPE)
    total = primitive_opacity(segments, raw, bounds, gamma).sum(0)
    return torch.clamp(total, max=1.0)


def iter_chunks(count: int, size: int = DEFAULT_CHUNK) -> Iterator[slice]:
    """Consecutive slices covering range(count)"""
    for start in range(0, count, size):
        yield slice(start, min(start + size, count))


def render_bundle(
    bundle: RayBundle,
    composition: Composition,
    config: RenderConfig,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Opacity of every ray of a bundle (no gradient), position-addressed by ray index"""
    result = np.zeros(len(bundle), dtype=np.float64)
    if len(composition) == 0:
        return result
    raw = composition.raw_tensor()
    with torch.no_grad():
        for part in iter_chunks(len(bundle), chunk):
            segments = march_segments(bundle.take(part), config)
            result[part] = composition_opacity(
                segments, raw, composition.bounds, config.gamma
            ).numpy()
    return result


def render_primitive(ray: Ray, params: SuperquadricParams, config: RenderConfig) -> float:
    """D(r, s) of a single superquadric"""
    return float(render_bundle(ray.bundle(), Composition([params]), config)[0])


def render_composition(ray: Ray, composition: Composition, config: RenderConfig) -> float:
    """D(r, S) = min(sum_i D(r, s_i), 1)"""
    return float(render_bundle(ray.bundle(), composition, config)[0])


def render_image(
    view: CameraView,
    composition: Composition,
    config: RenderConfig,
    bounds: SceneBounds = SceneBounds(),
) -> np.ndarray:
    """Rendered silhouette raster [height, width] in [0, 1]"""
    values = render_bundle(image_rays(view, bounds), composition, config)
    return values.reshape(view.height, view.width)
