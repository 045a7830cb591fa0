""" sqrecompose.synth.generator: random ground-truth scenes and calibrated views

Scenes are drawn by rejection sampling: every superquadric must lie inside the scene bounding sphere and no superquadric
may be contained in another. Cameras sit on a sphere of three scene radii around the scene center and look at it,
either from anywhere on the sphere or from a spherical cap around the +z pole.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from sqrecompose.assets.bundle import SceneBundle
from sqrecompose.common.utils import derive_seed
from sqrecompose.constants import EPS_MAX, EPS_MIN
from sqrecompose.model.camera import CameraView, SceneBounds, intrinsics_from_fov, look_at
from sqrecompose.model.render import RenderConfig, render_image
from sqrecompose.model.superquadric import (
    Composition,
    ShapeBounds,
    SuperquadricParams,
    canonical_to_world,
    implicit_value,
    world_to_canonical,
)
from .types import GenerationExhausted, GenSpecException

LOGGER = logging.getLogger(__name__)

CAMERA_DISTANCE = 3.0
FIELD_OF_VIEW_DEG = 60.0
POLE_TOLERANCE_DEG = 1.0
MAX_REJECTIONS = 10_000
CAP_PRESETS = (90.0, 45.0, 22.5)
VIEWPOINT_POLICIES = ("sphere", "cap")

SCENE_STREAM = 1
VIEW_STREAM = 2
MASK_STREAM = 3
NOISE_STREAM = 4


@dataclass(frozen=True)
class GenSpec:
    """Synthetic scene and view settings

    Scales are in scene units. position_radius bounds the distance of primitive centers from the scene center. The
    cap policy restricts camera polar angles to at most cap_deg from +z.
    """

    count_range: Tuple[int, int] = (1, 3)
    alpha_range: Tuple[float, float] = (0.15, 0.4)
    epsilon_range: Tuple[float, float] = (0.3, 1.7)
    position_radius: float = 0.4
    random_rotation: bool = True
    disjoint: bool = False
    views: int = 16
    viewpoints: str = "sphere"
    cap_deg: float = 90.0
    mask_noise: float = 0.0
    image_size: int = 128
    scene_radius: float = 1.0
    gamma: float = 150.0
    samples_per_ray: int = 256
    seed: int = 0

    def __post_init__(self):
        low, high = self.count_range
        if not 1 <= low <= high:
            raise GenSpecException(f"Primitive count range must satisfy 1 <= low <= high, got {self.count_range}")
        if not 0 < self.alpha_range[0] <= self.alpha_range[1]:
            raise GenSpecException(f"Scale range must be positive and ordered, got {self.alpha_range}")
        if not EPS_MIN < self.epsilon_range[0] <= self.epsilon_range[1] < EPS_MAX:
            raise GenSpecException(
                f"Exponent range must be ordered within ({EPS_MIN}, {EPS_MAX}), got {self.epsilon_range}"
            )
        if self.views < 1:
            raise GenSpecException(f"View count must be at least 1, got {self.views}")
        if self.viewpoints not in VIEWPOINT_POLICIES:
            raise GenSpecException(
                f"Viewpoint policy must be one of {', '.join(VIEWPOINT_POLICIES)}, got {self.viewpoints}"
            )
        if not 0 < self.cap_deg <= 90:
            raise GenSpecException(f"Cap angle must lie in (0, 90] degrees, got {self.cap_deg}")
        if not 0 <= self.mask_noise <= 1:
            raise GenSpecException(f"Mask noise must lie in [0, 1], got {self.mask_noise}")
        if self.image_size < 1 or self.scene_radius <= 0 or self.position_radius < 0:
            raise GenSpecException("Image size, scene radius and position radius must be positive")
        if self.gamma <= 0 or self.samples_per_ray < 2:
            raise GenSpecException("Mask rendering needs a positive gamma and at least 2 samples per ray")

    @property
    def bounds(self) -> SceneBounds:
        return SceneBounds((0.0, 0.0, 0.0), self.scene_radius)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    yaw, roll = rng.uniform(-np.pi, np.pi, size=2)
    pitch = np.arcsin(rng.uniform(-1.0, 1.0))
    return np.array([yaw, pitch, roll])


def containment_points(params: SuperquadricParams) -> np.ndarray:
    """26 world points on the surface, along the directions of the 3x3x3 lattice neighbours"""
    directions = np.array(
        [d for d in np.ndindex(3, 3, 3) if d != (1, 1, 1)], dtype=np.float64
    ) - 1.0
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    values = implicit_value(directions, params)
    canonical = directions * (values ** (-params.epsilon[0] / 2.0))[:, None]
    return canonical_to_world(canonical, params)


def is_contained(inner: SuperquadricParams, outer: SuperquadricParams) -> bool:
    """True when every containment point of inner lies strictly inside outer"""
    values = implicit_value(world_to_canonical(containment_points(inner), outer), outer)
    return bool(np.all(values < 1.0))


def bounding_radius(params: SuperquadricParams) -> float:
    """Radius of a sphere around the translation enclosing the primitive"""
    return float(np.linalg.norm(params.alpha))


def _draw_primitive(spec: GenSpec, bounds: ShapeBounds, rng: np.random.Generator) -> SuperquadricParams:
    alpha = rng.uniform(*spec.alpha_range, size=3)
    epsilon = rng.uniform(*spec.epsilon_range, size=2)
    euler = _random_rotation(rng) if spec.random_rotation else np.zeros(3)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    translation = direction * spec.position_radius * rng.uniform() ** (1.0 / 3.0)
    return SuperquadricParams.from_constrained(alpha, epsilon, euler, translation, bounds)


def _acceptable(candidate: SuperquadricParams, accepted: Sequence[SuperquadricParams], spec: GenSpec) -> bool:
    reach = np.linalg.norm(candidate.translation) + bounding_radius(candidate)
    if reach > spec.scene_radius:
        return False
    for other in accepted:
        if spec.disjoint:
            gap = np.linalg.norm(candidate.translation - other.translation)
            if gap <= bounding_radius(candidate) + bounding_radius(other):
                return False
        if is_contained(candidate, other) or is_contained(other, candidate):
            return False
    return True


def gen_scene(spec: GenSpec, rng: np.random.Generator) -> Composition:
    """Random ground-truth composition inside the scene bounds

    Raises:
        GenerationExhausted: 10^4 candidates were rejected
    """
    bounds = ShapeBounds.for_scene(spec.scene_radius)
    count = int(rng.integers(spec.count_range[0], spec.count_range[1] + 1))
    accepted: List[SuperquadricParams] = []
    rejections = 0
    while len(accepted) < count:
        candidate = _draw_primitive(spec, bounds, rng)
        if _acceptable(candidate, accepted, spec):
            accepted.append(candidate)
            continue
        rejections += 1
        if rejections >= MAX_REJECTIONS:
            raise GenerationExhausted(
                f"Placed {len(accepted)} of {count} superquadrics before {rejections} rejections", rejections
            )
    LOGGER.debug("Generated %d superquadrics after %d rejections", count, rejections)
    return Composition(accepted, bounds)


def camera_up(direction: np.ndarray) -> np.ndarray:
    """World +z, or +x when the viewing direction is within one degree of the z axis"""
    direction = np.asarray(direction, dtype=np.float64)
    cosine = abs(direction[2]) / np.linalg.norm(direction)
    if cosine >= np.cos(np.radians(POLE_TOLERANCE_DEG)):
        return np.array([1.0, 0.0, 0.0])
    return np.array([0.0, 0.0, 1.0])


def gen_views(spec: GenSpec, rng: np.random.Generator) -> List[CameraView]:
    """Cameras looking at the scene center from 3 scene radii, with empty silhouettes"""
    lowest = -1.0 if spec.viewpoints == "sphere" else np.cos(np.radians(spec.cap_deg))
    heights = rng.uniform(lowest, 1.0, size=spec.views)
    azimuths = rng.uniform(0.0, 2.0 * np.pi, size=spec.views)
    center = spec.bounds.center_array
    fx, fy, cx, cy = intrinsics_from_fov(spec.image_size, spec.image_size, FIELD_OF_VIEW_DEG)
    views = []
    for view_id, (height, azimuth) in enumerate(zip(heights, azimuths)):
        ring = np.sqrt(max(0.0, 1.0 - height**2))
        position = np.array([ring * np.cos(azimuth), ring * np.sin(azimuth), height])
        eye = center + CAMERA_DISTANCE * spec.scene_radius * position
        pose = look_at(eye, center, camera_up(center - eye))
        views.append(
            CameraView(fx, fy, cx, cy, pose, spec.image_size, spec.image_size, None, view_id)
        )
    return views


def render_masks(
    views: Sequence[CameraView], composition: Composition, spec: GenSpec, rng: np.random.Generator
) -> List[CameraView]:
    """Binary ground-truth masks rendered at the evaluation slope, with optional per-pixel flips"""
    config = RenderConfig(spec.gamma, spec.samples_per_ray, derive_seed(spec.seed, MASK_STREAM), substeps=1)
    result = []
    for view in views:
        mask = (render_image(view, composition, config, spec.bounds) >= 0.5).astype(np.float64)
        if spec.mask_noise > 0:
            flips = rng.random(mask.shape) < spec.mask_noise
            mask = np.where(flips, 1.0 - mask, mask)
        result.append(view.with_silhouette(mask))
    return result


def gen_bundle(spec: GenSpec) -> Tuple[SceneBundle, Composition]:
    """Scene bundle of rendered masks plus its ground-truth composition"""
    scene = gen_scene(spec, np.random.default_rng(derive_seed(spec.seed, SCENE_STREAM)))
    views = gen_views(spec, np.random.default_rng(derive_seed(spec.seed, VIEW_STREAM)))
    views = render_masks(views, scene, spec, np.random.default_rng(derive_seed(spec.seed, NOISE_STREAM)))
    name = f"synthetic-{len(scene)}sq-{spec.views}v-seed{spec.seed}"
    return SceneBundle(views, spec.bounds, name, spec.seed), scene
