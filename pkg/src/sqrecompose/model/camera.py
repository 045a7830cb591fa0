""" sqrecompose.model.camera: pinhole cameras and ray generation

Camera convention: in the camera frame the camera looks down +z, x points right and y points down, matching the usual
computer-vision intrinsics (fx, fy, cx, cy). Pixel (row, col) has its center at continuous coordinates
(u, v) = (col + 0.5, row + 0.5) and flat index row * width + col.

Every ray is clipped to the scene bounding sphere: [t_near, t_far] is the sphere intersection interval padded by 5%.
Rays missing the sphere get an empty interval collapsed to the point of closest approach.
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from sqrecompose.constants import RAY_PAD
from .types import NonFiniteIntrinsics, NonRigidPose

POSE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class SceneBounds:
    """Bounding sphere enclosing the reconstructed object"""

    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3 or not np.all(np.isfinite(self.center)):
            raise ValueError(f"Scene center must be a finite 3-vector, got {self.center}")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"Scene radius must be positive, got {self.radius}")

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64)


def rigid_pose_error(matrix: np.ndarray) -> float:
    """Largest deviation of a 4x4 matrix from a proper rigid transform (inf for a reflection or bad shape)"""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (4, 4) or not np.all(np.isfinite(matrix)):
        return float("inf")
    rotation = matrix[:3, :3]
    if np.linalg.det(rotation) <= 0:
        return float("inf")
    orthogonality = np.abs(rotation.T @ rotation - np.eye(3)).max()
    last_row = np.abs(matrix[3] - np.array([0.0, 0.0, 0.0, 1.0])).max()
    return float(max(orthogonality, last_row))


@dataclass(eq=False)
class CameraView:
    """A calibrated view: pinhole intrinsics, camera-to-world pose and the ground-truth silhouette"""

    fx: float
    fy: float
    cx: float
    cy: float
    cam_to_world: np.ndarray
    width: int
    height: int
    silhouette: np.ndarray = None
    view_id: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.fx) and np.isfinite(self.fy)) or self.fx <= 0 or self.fy <= 0:
            raise NonFiniteIntrinsics(
                f"Focal lengths must be finite and positive, got fx={self.fx}, fy={self.fy}"
            )
        self.cam_to_world = np.asarray(self.cam_to_world, dtype=np.float64).reshape(4, 4)
        error = rigid_pose_error(self.cam_to_world)
        if error > POSE_TOLERANCE:
            raise NonRigidPose(
                f"View {self.view_id}: camera pose is not rigid (deviation {error:.3g})"
            )
        if self.silhouette is None:
            self.silhouette = np.zeros((self.height, self.width), dtype=np.float64)
        self.silhouette = np.asarray(self.silhouette, dtype=np.float64)
        if self.silhouette.shape != (self.height, self.width):
            raise ValueError(
                f"Silhouette shape {self.silhouette.shape} does not match {self.height}x{self.width}"
            )
        if self.silhouette.size and (
            self.silhouette.min() < 0.0 or self.silhouette.max() > 1.0
        ):
            raise ValueError("Silhouette values must lie in [0, 1]")

    @property
    def rotation(self) -> np.ndarray:
        return self.cam_to_world[:3, :3]

    @property
    def center(self) -> np.ndarray:
        return self.cam_to_world[:3, 3]

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def with_silhouette(self, silhouette: np.ndarray) -> "CameraView":
        return CameraView(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.cam_to_world,
            self.width,
            self.height,
            silhouette,
            self.view_id,
        )


@dataclass
class Ray:
    """r(t) = o + t d restricted to [t_near, t_far]"""

    origin: np.ndarray
    direction: np.ndarray
    t_near: float
    t_far: float
    view_id: int = 0
    pixel_id: int = 0

    def bundle(self) -> "RayBundle":
        return RayBundle(
            self.origin[None, :],
            self.direction[None, :],
            np.array([self.t_near]),
            np.array([self.t_far]),
            np.array([self.view_id]),
            np.array([self.pixel_id]),
        )


@dataclass
class RayBundle:
    """Structure-of-arrays batch of rays, [R, 3] origins/directions and [R] bounds and ids"""

    origins: np.ndarray
    directions: np.ndarray
    t_near: np.ndarray
    t_far: np.ndarray
    view_ids: np.ndarray
    pixel_ids: np.ndarray

    def __len__(self):
        return self.origins.shape[0]

    def ray(self, index: int) -> Ray:
        return Ray(
            self.origins[index],
            self.directions[index],
            float(self.t_near[index]),
            float(self.t_far[index]),
            int(self.view_ids[index]),
            int(self.pixel_ids[index]),
        )

    def take(self, index) -> "RayBundle":
        """Sub-bundle selected by a slice or index array"""
        return RayBundle(
            self.origins[index],
            self.directions[index],
            self.t_near[index],
            self.t_far[index],
            self.view_ids[index],
            self.pixel_ids[index],
        )

    @staticmethod
    def concatenate(bundles: Sequence["RayBundle"]) -> "RayBundle":
        return RayBundle(
            *(
                np.concatenate([getattr(bundle, name) for bundle in bundles])
                for name in (
                    "origins",
                    "directions",
                    "t_near",
                    "t_far",
                    "view_ids",
                    "pixel_ids",
                )
            )
        )


def intersect_bounds(
    origins: np.ndarray, directions: np.ndarray, bounds: SceneBounds
) -> Tuple[np.ndarray, np.ndarray]:
    """Padded bounding-sphere interval of unit-direction rays

    Returns:
        (t_near, t_far), equal for rays that miss the sphere
    """
    offset = origins - bounds.center_array
    half_b = np.einsum("ij,ij->i", offset, directions)
    c_term = np.einsum("ij,ij->i", offset, offset) - bounds.radius**2
    discriminant = half_b**2 - c_term
    hit = discriminant > 0
    root = np.sqrt(np.where(hit, discriminant, 0.0))
    enter = np.maximum(-half_b - root, 0.0)
    leave = np.maximum(-half_b + root, 0.0)
    closest = np.maximum(-half_b, 0.0)
    t_near = np.where(hit, (1.0 - RAY_PAD) * enter, closest)
    t_far = np.where(hit, (1.0 + RAY_PAD) * leave, closest)
    return t_near, t_far


def _directions(view: CameraView, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    camera = np.stack(
        [(u - view.cx) / view.fx, (v - view.cy) / view.fy, np.ones_like(u)], -1
    )
    world = camera @ view.rotation.T
    return world / np.linalg.norm(world, axis=-1, keepdims=True)


def pixel_ray(
    view: CameraView, pixel: Tuple[float, float], bounds: SceneBounds = SceneBounds()
) -> Ray:
    """Ray through continuous pixel coordinates (u, v)"""
    u, v = float(pixel[0]), float(pixel[1])
    direction = _directions(view, np.array([u]), np.array([v]))
    origin = view.center[None, :]
    t_near, t_far = intersect_bounds(origin, direction, bounds)
    col = min(max(int(np.floor(u)), 0), view.width - 1)
    row = min(max(int(np.floor(v)), 0), view.height - 1)
    return Ray(
        origin[0].copy(),
        direction[0],
        float(t_near[0]),
        float(t_far[0]),
        view.view_id,
        row * view.width + col,
    )


def pixel_rays(
    view: CameraView, pixel_ids: np.ndarray, bounds: SceneBounds = SceneBounds()
) -> RayBundle:
    """Rays through the centers of the given flat pixel indices"""
    pixel_ids = np.asarray(pixel_ids, dtype=np.int64)
    rows, cols = np.divmod(pixel_ids, view.width)
    directions = _directions(view, cols + 0.5, rows + 0.5)
    origins = np.broadcast_to(view.center, directions.shape).copy()
    t_near, t_far = intersect_bounds(origins, directions, bounds)
    return RayBundle(
        origins,
        directions,
        t_near,
        t_far,
        np.full(pixel_ids.shape, view.view_id, dtype=np.int64),
        pixel_ids,
    )


def image_rays(view: CameraView, bounds: SceneBounds = SceneBounds()) -> RayBundle:
    """Rays through every pixel center, in flat pixel order"""
    return pixel_rays(view, np.arange(view.pixel_count), bounds)


def ray_point(ray: Ray, t: float) -> np.ndarray:
    """o + t d"""
    return ray.origin + t * ray.direction


def project(view: CameraView, points: np.ndarray) -> np.ndarray:
    """Continuous pixel coordinates (u, v) of world points [..., 3]"""
    camera = (np.asarray(points, dtype=np.float64) - view.center) @ view.rotation
    return np.stack(
        [
            view.fx * camera[..., 0] / camera[..., 2] + view.cx,
            view.fy * camera[..., 1] / camera[..., 2] + view.cy,
        ],
        -1,
    )


def look_at(eye: np.ndarray, target: np.ndarray, up: np.ndarray) -> np.ndarray:
    """Camera-to-world pose placing the camera at eye, optical axis (+z) through target

    The camera x axis is forward x up (right), the y axis is forward x right (down).
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = down
    pose[:3, 2] = forward
    pose[:3, 3] = eye
    return pose


def intrinsics_from_fov(width: int, height: int, fov_deg: float) -> Tuple[float, float, float, float]:
    """(fx, fy, cx, cy) of a square-pixel camera with the given vertical field of view"""
    focal = 0.5 * height / np.tan(np.radians(fov_deg) / 2.0)
    return focal, focal, width / 2.0, height / 2.0
