"""
(test) sqrecompose.model.camera:

Tests camera validation, ray generation and bounding-sphere clipping.
"""

import numpy as np
import pytest

from sqrecompose.model.camera import (
    CameraView,
    SceneBounds,
    image_rays,
    intersect_bounds,
    look_at,
    pixel_ray,
    pixel_rays,
    project,
    ray_point,
)
from sqrecompose.model.types import NonFiniteIntrinsics, NonRigidPose


def test_look_at_is_rigid(make_view):
    view = make_view((1.0, 2.0, 0.5))
    rotation = view.rotation
    np.testing.assert_allclose(rotation.T @ rotation, np.eye(3), atol=1e-12)
    assert np.linalg.det(rotation) == pytest.approx(1.0)
    np.testing.assert_allclose(np.linalg.norm(view.center), 3.0)


def test_scene_center_projects_to_principal_point(make_view):
    view = make_view((0.0, -1.0, 0.0), size=32)
    np.testing.assert_allclose(project(view, np.zeros(3)), [16.0, 16.0], atol=1e-9)


def test_central_ray_is_clipped_to_padded_sphere(make_view):
    view = make_view((0.0, 0.0, 1.0), size=32)
    ray = pixel_ray(view, (16.0, 16.0))
    np.testing.assert_allclose(ray.direction, [0.0, 0.0, -1.0], atol=1e-12)
    assert ray.t_near == pytest.approx(0.95 * 2.0)
    assert ray.t_far == pytest.approx(1.05 * 4.0)
    np.testing.assert_allclose(ray_point(ray, 3.0), np.zeros(3), atol=1e-12)
    assert ray.pixel_id == 16 * 32 + 16


def test_missing_ray_has_empty_interval():
    origins = np.array([[0.0, 3.0, 0.0]])
    directions = np.array([[1.0, 0.0, 0.0]])
    t_near, t_far = intersect_bounds(origins, directions, SceneBounds())
    assert t_near[0] == t_far[0]


def test_image_rays_follow_flat_pixel_order(make_view):
    view = make_view((1.0, 0.0, 0.0), view_id=4, size=8)
    rays = image_rays(view)
    assert len(rays) == 64
    np.testing.assert_array_equal(rays.pixel_ids, np.arange(64))
    assert np.all(rays.view_ids == 4)
    subset = pixel_rays(view, np.array([9, 63]))
    np.testing.assert_allclose(subset.directions, rays.directions[[9, 63]])
    np.testing.assert_allclose(np.linalg.norm(rays.directions, axis=1), 1.0)


def test_invalid_cameras():
    with pytest.raises(NonFiniteIntrinsics):
        CameraView(0.0, 10.0, 4.0, 4.0, np.eye(4), 8, 8)
    with pytest.raises(NonFiniteIntrinsics):
        CameraView(np.inf, 10.0, 4.0, 4.0, np.eye(4), 8, 8)
    scaled = np.eye(4)
    scaled[0, 0] = 2.0
    with pytest.raises(NonRigidPose):
        CameraView(10.0, 10.0, 4.0, 4.0, scaled, 8, 8)
    mirrored = np.eye(4)
    mirrored[2, 2] = -1.0
    with pytest.raises(NonRigidPose):
        CameraView(10.0, 10.0, 4.0, 4.0, mirrored, 8, 8)


def test_silhouette_shape_is_checked():
    with pytest.raises(ValueError):
        CameraView(10.0, 10.0, 4.0, 4.0, np.eye(4), 8, 8, np.zeros((4, 4)))
    view = CameraView(10.0, 10.0, 4.0, 4.0, np.eye(4), 8, 6)
    assert view.silhouette.shape == (6, 8)


def test_look_at_axes():
    pose = look_at(np.array([0.0, -3.0, 0.0]), np.zeros(3), np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(pose[:3, 2], [0.0, 1.0, 0.0])
    # image y points down in the world when up is +z
    np.testing.assert_allclose(pose[:3, 1], [0.0, 0.0, -1.0])


def test_points_on_pixel_rays_project_back(make_view):
    view = make_view((0.7, -0.4, 1.0), size=20)
    rng = np.random.default_rng(17)
    for pixel in rng.uniform(2.0, 18.0, size=(25, 2)):
        ray = pixel_ray(view, pixel)
        for t in np.linspace(ray.t_near, ray.t_far, 5):
            np.testing.assert_allclose(project(view, ray_point(ray, t)), pixel, atol=1e-9)
