"""
(test) sqrecompose.assets.bundle:

Tests reading and writing scene bundles of masks and calibrated cameras.
"""

import json

import numpy as np
import pytest

from sqrecompose.assets.bundle import (
    MANIFEST,
    SceneBundle,
    load_bundle,
    resize_views,
    save_bundle,
)
from sqrecompose.assets.types import DimensionMismatch, ImageDecode, ManifestParse, NonRigidPose
from sqrecompose.model.camera import SceneBounds


@pytest.fixture
def saved_bundle(tmp_path, make_views, mixed_scene):
    views = make_views(mixed_scene, [(1.0, 0.0, 0.0), (0.0, 1.0, 0.3)], size=12)
    bundle = SceneBundle(views, SceneBounds((0.0, 0.0, 0.1), 1.5), "mixed", 7)
    save_bundle(bundle, tmp_path / "scene")
    return bundle, tmp_path / "scene"


def _rewrite_manifest(directory, change):
    manifest = directory / MANIFEST
    data = json.loads(manifest.read_text())
    change(data)
    manifest.write_text(json.dumps(data))


def test_bundle_survives_a_round_trip(saved_bundle):
    bundle, directory = saved_bundle
    loaded = load_bundle(directory)
    assert loaded.name == "mixed"
    assert loaded.seed == 7
    assert loaded.bounds == bundle.bounds
    assert len(loaded.views) == 2
    for original, read in zip(bundle.views, loaded.views):
        np.testing.assert_array_equal(read.silhouette, original.silhouette)
        np.testing.assert_allclose(read.cam_to_world, original.cam_to_world)
        assert [read.fx, read.fy, read.cx, read.cy] == pytest.approx(
            [original.fx, original.fy, original.cx, original.cy]
        )
    assert load_bundle(directory / MANIFEST).name == "mixed"


def test_cameras_only(saved_bundle):
    _, directory = saved_bundle
    (directory / "v000.png").unlink()
    views = load_bundle(directory, load_masks=False).views
    assert len(views) == 2
    assert not views[0].silhouette.any()


def test_missing_manifest_names_the_path(tmp_path):
    with pytest.raises(ManifestParse) as excinfo:
        load_bundle(tmp_path / "nowhere")
    assert str(tmp_path / "nowhere" / MANIFEST) in str(excinfo.value)


def test_invalid_json(tmp_path):
    (tmp_path / MANIFEST).write_text("{ not json")
    with pytest.raises(ManifestParse):
        load_bundle(tmp_path)
    (tmp_path / MANIFEST).write_text(json.dumps({"views": []}))
    with pytest.raises(ManifestParse):
        load_bundle(tmp_path)


def test_missing_camera_field(saved_bundle):
    _, directory = saved_bundle
    _rewrite_manifest(directory, lambda data: data["views"][1].pop("fx"))
    with pytest.raises(ManifestParse) as excinfo:
        load_bundle(directory)
    assert "'fx'" in str(excinfo.value)


def test_corrupt_mask_carries_its_path(saved_bundle):
    _, directory = saved_bundle
    (directory / "v001.png").write_bytes(b"not an image")
    with pytest.raises(ImageDecode) as excinfo:
        load_bundle(directory)
    assert excinfo.value.path == directory / "v001.png"


def test_mask_size_mismatch(saved_bundle):
    _, directory = saved_bundle
    _rewrite_manifest(directory, lambda data: data["views"][0].update(width=13))
    with pytest.raises(DimensionMismatch):
        load_bundle(directory)


def test_scaled_pose_is_rejected(saved_bundle):
    _, directory = saved_bundle

    def scale(data):
        pose = np.asarray(data["views"][0]["cam_to_world"]).reshape(4, 4)
        pose[:3, :3] *= 2.0
        data["views"][0]["cam_to_world"] = pose.reshape(-1).tolist()

    _rewrite_manifest(directory, scale)
    with pytest.raises(NonRigidPose):
        load_bundle(directory)


def test_resize_views(make_view):
    view = make_view((1.0, 0.0, 0.0), size=16).with_silhouette(np.ones((16, 16)))
    resized = resize_views([view], 8)[0]
    assert (resized.width, resized.height) == (8, 8)
    assert resized.silhouette.shape == (8, 8)
    assert resized.fx == pytest.approx(view.fx / 2.0)
    assert resized.cx == pytest.approx(view.cx / 2.0)
    np.testing.assert_allclose(resized.silhouette, 1.0)
    assert resize_views([view], 0)[0] is view
    assert resize_views([view], 16)[0] is view
