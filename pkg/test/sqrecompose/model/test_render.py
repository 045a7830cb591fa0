"""
(test) sqrecompose.model.render:

Tests the ray-marched silhouette renderer.
"""

import numpy as np
import pytest
import torch
from scipy.integrate import quad
from scipy.special import expit

from sqrecompose.model.camera import Ray, SceneBounds, image_rays, intersect_bounds, pixel_ray
from sqrecompose.model.render import (
    RenderConfig,
    march_segments,
    mean_logistic,
    render_bundle,
    render_composition,
    render_image,
    render_primitive,
)
from sqrecompose.model.superquadric import Composition, SuperquadricParams

CONFIG = RenderConfig(150.0, 96, 7)


def test_empty_composition_renders_nothing(make_view):
    view = make_view((1.0, 0.0, 0.0), size=8)
    image = render_image(view, Composition(), CONFIG)
    assert image.shape == (8, 8)
    assert not image.any()


def test_opaque_center_and_empty_border(make_view):
    view = make_view((0.0, 0.0, 1.0), size=32)
    sphere = SuperquadricParams.sphere((0.0, 0.0, 0.0), 0.5)
    assert render_primitive(pixel_ray(view, (16.0, 16.0)), sphere, CONFIG) > 0.999
    # corner rays miss the bounding sphere entirely
    assert render_primitive(pixel_ray(view, (0.5, 0.5)), sphere, CONFIG) == 0.0


def test_silhouette_area_matches_projection(make_view):
    view = make_view((0.0, 1.0, 0.0), size=48)
    sphere = Composition([SuperquadricParams.sphere((0.0, 0.0, 0.0), 0.4)])
    image = render_image(view, sphere, CONFIG)
    # angular radius of the sphere seen from distance 3
    radius_px = view.fx * np.tan(np.arcsin(0.4 / 3.0))
    assert np.count_nonzero(image >= 0.5) == pytest.approx(np.pi * radius_px**2, rel=0.15)


def test_composition_is_clamped(make_view):
    view = make_view((1.0, 0.0, 0.0), size=16)
    first = SuperquadricParams.sphere((0.0, 0.0, 0.0), 0.4)
    second = SuperquadricParams.sphere((0.0, 0.05, 0.0), 0.4)
    ray = pixel_ray(view, (8.0, 8.0))
    assert render_primitive(ray, first, CONFIG) + render_primitive(ray, second, CONFIG) > 1.9
    assert render_composition(ray, Composition([first, second]), CONFIG) == pytest.approx(1.0)
    image = render_image(view, Composition([first, second]), CONFIG)
    assert image.max() <= 1.0
    assert image.min() >= 0.0


def test_renders_are_deterministic(make_view, mixed_scene):
    view = make_view((1.0, 1.0, 0.3), size=16)
    np.testing.assert_array_equal(
        render_image(view, mixed_scene, CONFIG), render_image(view, mixed_scene, CONFIG)
    )


def test_chunking_does_not_change_results(make_view, mixed_scene):
    view = make_view((0.2, -1.0, 0.5), size=16)
    rays = image_rays(view)
    np.testing.assert_allclose(
        render_bundle(rays, mixed_scene, CONFIG, chunk=7),
        render_bundle(rays, mixed_scene, CONFIG, chunk=4096),
        rtol=0,
        atol=1e-12,
    )


def test_invalid_config():
    with pytest.raises(ValueError):
        RenderConfig(gamma=0.0)
    with pytest.raises(ValueError):
        RenderConfig(samples_per_ray=1)
    with pytest.raises(ValueError):
        RenderConfig(substeps=0)


def _random_pair(rng):
    """A ray from distance 3 aimed into the central region and a moderate random superquadric"""
    direction = rng.normal(size=3)
    origin = 3.0 * direction / np.linalg.norm(direction)
    aim = rng.uniform(-0.3, 0.3, size=3) - origin
    aim /= np.linalg.norm(aim)
    t_near, t_far = intersect_bounds(origin[None, :], aim[None, :], SceneBounds())
    ray = Ray(origin, aim, float(t_near[0]), float(t_far[0]), 0, int(rng.integers(1000)))
    params = SuperquadricParams.from_constrained(
        rng.uniform(0.15, 0.4, size=3),
        rng.uniform(0.5, 1.5, size=2),
        rng.uniform(-np.pi, np.pi, size=3),
        rng.uniform(-0.1, 0.1, size=3),
    )
    return ray, params


def test_coarse_and_fine_marching_agree_per_ray():
    rng = np.random.default_rng(2024)
    coarse, fine = RenderConfig(50.0, 64, 3), RenderConfig(50.0, 1024, 3)
    for _ in range(100):
        ray, params = _random_pair(rng)
        assert render_primitive(ray, params, coarse) == pytest.approx(
            render_primitive(ray, params, fine), abs=0.01
        )


def test_composition_order_does_not_matter(make_view, mixed_scene):
    view = make_view((0.4, 1.0, -0.3), size=16)
    extra = SuperquadricParams.sphere((0.0, -0.2, 0.1), 0.2)
    forward = Composition(list(mixed_scene) + [extra])
    backward = Composition([extra] + list(reversed(list(mixed_scene))))
    np.testing.assert_allclose(
        render_image(view, forward, CONFIG), render_image(view, backward, CONFIG), rtol=0, atol=1e-12
    )
    ray = pixel_ray(view, (8.0, 8.0))
    assert render_composition(ray, forward, CONFIG) == pytest.approx(
        render_composition(ray, backward, CONFIG), abs=1e-12
    )


def test_sharper_density_darkens_interior_rays(make_view):
    view = make_view((0.0, 0.0, 1.0), size=32)
    sphere = SuperquadricParams.sphere((0.0, 0.0, 0.0), 0.2)
    ray = pixel_ray(view, (16.0, 16.0))
    opacities = [render_primitive(ray, sphere, RenderConfig(gamma, 96, 5)) for gamma in (10.0, 50.0, 150.0)]
    assert opacities[0] <= opacities[1] <= opacities[2]
    assert opacities[0] < opacities[2]


def test_mean_logistic_integrates_the_logistic():
    start = torch.tensor([-3.0, 0.5, 2.0, -1.0, 4.0], dtype=torch.float64)
    end = torch.tensor([1.0, 0.5, 2.004, 1.0, -2.0], dtype=torch.float64)
    expected = [
        quad(lambda s, a=a, b=b: expit(a + (b - a) * s), 0.0, 1.0, epsabs=1e-13)[0]
        for a, b in zip(start.numpy(), end.numpy())
    ]
    np.testing.assert_allclose(mean_logistic(start, end).numpy(), expected, rtol=0, atol=1e-9)
    # symmetric arguments average to one half
    assert float(mean_logistic(start[3:4], end[3:4])) == pytest.approx(0.5, abs=1e-14)


def test_empty_interval_is_transparent():
    ray = Ray(np.array([0.0, 3.0, 0.0]), np.array([1.0, 0.0, 0.0]), 2.0, 2.0, 0, 0)
    sphere = SuperquadricParams.sphere((0.0, 3.0, 0.0), 0.4)
    assert render_primitive(ray, sphere, CONFIG) == 0.0


def test_segments_cover_the_interval(make_view):
    rays = image_rays(make_view((1.0, 0.0, 0.0), size=4))
    segments = march_segments(rays, RenderConfig(20.0, 16, 3, reference_samples=16, substeps=3))
    assert segments.nodes.shape == (16, 17 * 3 + 1, 3)
    lengths = segments.optical_lengths.numpy()
    assert np.all(lengths >= 0)
    spans = rays.t_far > rays.t_near
    assert spans.any()
    np.testing.assert_allclose(lengths.sum(-1), np.where(spans, 16.0, 0.0), rtol=1e-12)
    np.testing.assert_allclose(segments.nodes[:, 0].numpy(), rays.origins + rays.t_near[:, None] * rays.directions)
    np.testing.assert_allclose(segments.nodes[:, -1].numpy(), rays.origins + rays.t_far[:, None] * rays.directions)
