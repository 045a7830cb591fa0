"""
(test) sqrecompose fixtures:

Small calibrated scenes shared by the unit tests: cameras on the coordinate axes looking at the origin, with binary
silhouettes rendered from a known composition.
"""

import numpy as np
import pytest

from sqrecompose.model.camera import CameraView, intrinsics_from_fov, look_at
from sqrecompose.model.render import RenderConfig, render_image
from sqrecompose.model.superquadric import Composition, SuperquadricParams
from sqrecompose.synth.generator import camera_up

AXES = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


def axis_view(direction, view_id=0, size=24, distance=3.0, fov=40.0):
    """Camera at distance along direction looking at the origin"""
    eye = distance * np.asarray(direction, dtype=np.float64) / np.linalg.norm(direction)
    pose = look_at(eye, np.zeros(3), camera_up(-eye))
    fx, fy, cx, cy = intrinsics_from_fov(size, size, fov)
    return CameraView(fx, fy, cx, cy, pose, size, size, None, view_id)


def silhouette_views(composition, directions=AXES, size=24):
    """Axis views with the binary silhouettes of composition"""
    config = RenderConfig(150.0, 128, 0)
    views = []
    for view_id, direction in enumerate(directions):
        view = axis_view(direction, view_id, size)
        mask = render_image(view, composition, config) >= 0.5
        views.append(view.with_silhouette(mask.astype(np.float64)))
    return views


@pytest.fixture
def make_views():
    return silhouette_views


@pytest.fixture
def make_view():
    return axis_view


@pytest.fixture
def sphere_scene():
    """One sphere of radius 0.35 off the origin"""
    return Composition([SuperquadricParams.sphere((0.3, 0.0, 0.0), 0.35)])


@pytest.fixture
def mixed_scene():
    """Two rotated, non-spherical superquadrics overlapping near the origin"""
    return Composition(
        [
            SuperquadricParams.from_constrained((0.3, 0.2, 0.25), (0.7, 1.3), (0.3, -0.2, 0.5), (0.15, 0.0, 0.05)),
            SuperquadricParams.from_constrained((0.15, 0.3, 0.2), (1.2, 0.6), (-0.4, 0.1, 0.2), (-0.2, 0.1, -0.1)),
        ]
    )
