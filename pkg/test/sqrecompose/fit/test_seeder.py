"""
(test) sqrecompose.fit.seeder:

Tests the voxel error grid and the placement of new superquadrics at its peaks.
"""

import numpy as np
import pytest
import torch

from sqrecompose.constants import DTYPE
from sqrecompose.fit.seeder import (
    VoxelGrid,
    eval_grid_density,
    find_peaks,
    grid_error_gradient,
    grid_object_loss,
    grid_radius_from_cameras,
    has_object_pixels,
    propose_init,
    propose_inits,
    smoothed_descent_field,
    trilinear,
    trilinear_sample,
)
from sqrecompose.fit.types import DegenerateErrorField
from sqrecompose.model.camera import SceneBounds
from sqrecompose.model.render import RenderConfig
from sqrecompose.model.superquadric import Composition, SuperquadricParams

CONFIG = RenderConfig(20.0, 48, 5)


def test_enclosing_grid_spans_the_scene():
    bounds = SceneBounds((0.5, 0.0, -0.5), 2.0)
    grid = VoxelGrid.enclosing(bounds, 9)
    assert grid.spacing == pytest.approx(0.5)
    np.testing.assert_allclose(grid.voxel_center((0, 0, 0)), [-1.5, -2.0, -2.5])
    np.testing.assert_allclose(grid.voxel_center((8, 8, 8)), [2.5, 2.0, 1.5])
    np.testing.assert_allclose(grid.centers()[4, 4, 4], bounds.center)
    assert grid.extent == pytest.approx(4.0)


def test_trilinear_reproduces_linear_fields():
    grid = VoxelGrid.enclosing(SceneBounds(), 6)
    centers = grid.centers()
    values = centers @ np.array([1.0, 2.0, -3.0]) + 0.5
    points = np.random.default_rng(2).uniform(-0.9, 0.9, size=(30, 3))
    sampled = trilinear(
        torch.as_tensor(values, dtype=DTYPE), grid.origin, grid.spacing, torch.as_tensor(points, dtype=DTYPE)
    ).numpy()
    np.testing.assert_allclose(sampled, points @ np.array([1.0, 2.0, -3.0]) + 0.5, atol=1e-12)
    filled = grid.with_values(values)
    assert trilinear_sample(filled, grid.voxel_center((2, 3, 1))) == pytest.approx(values[2, 3, 1])
    assert trilinear_sample(filled, (5.0, 0.0, 0.0)) == 0.0


def test_grid_density_of_a_sphere():
    grid = VoxelGrid.enclosing(SceneBounds(), 11)
    empty = eval_grid_density(Composition(), grid, 150.0)
    assert not empty.values.any()
    sphere = Composition([SuperquadricParams.sphere((0.0, 0.0, 0.0), 0.5)])
    density = eval_grid_density(sphere, grid, 150.0).values
    assert density[5, 5, 5] == pytest.approx(1.0)
    assert density[0, 0, 0] < 1e-6
    assert density.max() <= 1.0


def test_error_grid_points_at_missing_object(make_views, sphere_scene):
    views = make_views(sphere_scene)
    bounds = SceneBounds()
    density = eval_grid_density(Composition(), VoxelGrid.enclosing(bounds, 16), 20.0)
    error = grid_error_gradient(density, views, None, None, CONFIG, bounds)
    assert error.values.min() < 0.0
    seed = propose_init(error, 1.0, bounds.radius)
    assert np.linalg.norm(seed.translation - [0.3, 0.0, 0.0]) < 0.2
    np.testing.assert_allclose(seed.alpha, 0.1)
    np.testing.assert_allclose(seed.epsilon, 1.0)


def test_error_grid_with_sampled_rays_is_reproducible(make_views, sphere_scene):
    views = make_views(sphere_scene)
    density = eval_grid_density(Composition(), VoxelGrid.enclosing(SceneBounds(), 8), 20.0)
    first = grid_error_gradient(density, views, 40, np.random.default_rng(9), CONFIG)
    second = grid_error_gradient(density, views, 40, np.random.default_rng(9), CONFIG)
    np.testing.assert_array_equal(first.values, second.values)


def test_empty_silhouettes_give_a_flat_field(make_view):
    views = [make_view((1.0, 0.0, 0.0), size=12)]
    assert not has_object_pixels(views)
    density = eval_grid_density(Composition(), VoxelGrid.enclosing(SceneBounds(), 8), 20.0)
    error = grid_error_gradient(density, views, None, None, CONFIG)
    assert not error.values.any()
    with pytest.raises(DegenerateErrorField):
        propose_init(error, 1.0, 1.0)
    with pytest.raises(DegenerateErrorField):
        propose_inits(error, 2, 1.0, 1.0)


def test_descent_field_ignores_ascent():
    grid = VoxelGrid.enclosing(SceneBounds(), 8)
    values = np.full((8, 8, 8), 0.5)
    values[2, 2, 2] = -1.0
    field = smoothed_descent_field(grid.with_values(values), 0.0)
    assert field[2, 2, 2] == 1.0
    assert field.sum() == 1.0
    smoothed = smoothed_descent_field(grid.with_values(values), 1.0)
    assert np.unravel_index(np.argmax(smoothed), smoothed.shape) == (2, 2, 2)
    with pytest.raises(ValueError):
        smoothed_descent_field(grid.with_values(np.full((8, 8, 8), np.nan)), 1.0)


def _bumps():
    axis = np.arange(16, dtype=np.float64)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    first = 2.0 * np.exp(-((x - 3) ** 2 + (y - 4) ** 2 + (z - 5) ** 2) / 4.0)
    second = np.exp(-((x - 12) ** 2 + (y - 11) ** 2 + (z - 10) ** 2) / 4.0)
    return first + second


def test_find_peaks_suppresses_neighbours():
    peaks = find_peaks(_bumps(), 3, 3.0)
    assert peaks == [(3, 4, 5), (12, 11, 10)]
    assert find_peaks(_bumps(), 1, 3.0) == [(3, 4, 5)]


def test_propose_inits_reuses_peaks():
    grid = VoxelGrid.enclosing(SceneBounds(), 16)
    seeds = propose_inits(grid.with_values(-_bumps()), 3, 1.0, 1.0)
    assert len(seeds) == 3
    np.testing.assert_allclose(seeds[0].translation, grid.voxel_center((3, 4, 5)))
    np.testing.assert_allclose(seeds[1].translation, grid.voxel_center((12, 11, 10)))
    np.testing.assert_allclose(seeds[2].translation, seeds[0].translation)


def test_grid_radius_from_cameras(make_view):
    views = [make_view((1.0, 0.0, 0.0)), make_view((0.0, 1.0, 1.0))]
    assert grid_radius_from_cameras(views, SceneBounds()) == pytest.approx(1.0)


def test_error_grid_matches_finite_differences(make_views, sphere_scene):
    views = make_views(sphere_scene, [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 1.0, 1.0)], size=8)
    grid = VoxelGrid.enclosing(SceneBounds(), 8)
    values = np.random.default_rng(31).uniform(0.0, 0.5, size=(8, 8, 8))
    analytic = grid_error_gradient(grid.with_values(values), views, None, None, CONFIG).values
    step = 1e-4
    numeric = np.zeros_like(values)
    for index in np.ndindex(values.shape):
        losses = []
        for sign in (1.0, -1.0):
            shifted = values.copy()
            shifted[index] += sign * step
            losses.append(grid_object_loss(grid.with_values(shifted), views, CONFIG))
        numeric[index] = (losses[0] - losses[1]) / (2.0 * step)
    significant = np.abs(analytic) > 1e-6 * np.abs(analytic).max()
    assert significant.sum() > 20
    relative = np.abs(analytic - numeric)[significant] / np.abs(analytic)[significant]
    assert relative.max() < 1e-4
    # the remaining voxels are flat in both
    assert np.all(np.abs(numeric[~significant]) < 2e-6 * np.abs(analytic).max())


def test_trilinear_is_continuous_across_cells():
    grid = VoxelGrid.enclosing(SceneBounds(), 6)
    rng = np.random.default_rng(12)
    values = torch.as_tensor(rng.uniform(-1.0, 1.0, size=(6, 6, 6)), dtype=DTYPE)
    points = rng.uniform(-0.8, 0.8, size=(40, 3))
    for axis in range(3):
        crossing = points.copy()
        cell = np.round((crossing[:, axis] - grid.origin[axis]) / grid.spacing)
        crossing[:, axis] = grid.origin[axis] + cell * grid.spacing
        below, above = crossing.copy(), crossing.copy()
        below[:, axis] -= 1e-9
        above[:, axis] += 1e-9
        sampled = [
            trilinear(values, grid.origin, grid.spacing, torch.as_tensor(side, dtype=DTYPE)).numpy()
            for side in (below, above)
        ]
        assert np.abs(sampled[0] - sampled[1]).max() < 1e-6


@pytest.mark.parametrize("scale", [1e-3, 1.0, 250.0])
def test_descent_peak_ignores_error_scale(scale):
    grid = VoxelGrid.enclosing(SceneBounds(), 10)
    values = np.random.default_rng(40).normal(size=(10, 10, 10))
    reference = smoothed_descent_field(grid.with_values(values), 1.0)
    scaled = smoothed_descent_field(grid.with_values(scale * values), 1.0)
    assert np.argmax(scaled) == np.argmax(reference)
    np.testing.assert_allclose(
        propose_init(grid.with_values(scale * values), 1.0, 1.0).translation,
        propose_init(grid.with_values(values), 1.0, 1.0).translation,
    )
