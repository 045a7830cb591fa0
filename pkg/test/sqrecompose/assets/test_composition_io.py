"""
(test) sqrecompose.assets.composition_io:

Tests the composition file format and the validation applied when reading it.
"""

import json

import numpy as np
import pytest

from sqrecompose.assets.composition_io import (
    SCHEMA_VERSION,
    composition_from_jsonable,
    composition_to_jsonable,
    load_composition,
    save_composition,
)
from sqrecompose.assets.types import CompositionValidation, ManifestParse, SchemaVersionMismatch
from sqrecompose.model.superquadric import Composition


def test_composition_file_keeps_raw_vectors(tmp_path, mixed_scene):
    path = save_composition(mixed_scene, tmp_path / "out" / "composition.json")
    loaded = load_composition(path)
    assert len(loaded) == 2
    np.testing.assert_array_equal(loaded.raw_matrix(), mixed_scene.raw_matrix())
    assert loaded.bounds == mixed_scene.bounds
    data = json.loads(path.read_text())
    assert data["schema_version"] == SCHEMA_VERSION
    assert set(data["items"][0]) == {"alpha", "epsilon", "euler", "translation", "raw"}


def test_empty_composition_file(tmp_path):
    loaded = load_composition(save_composition(Composition(), tmp_path / "empty.json"))
    assert len(loaded) == 0


def test_items_from_constrained_values():
    data = {
        "schema_version": SCHEMA_VERSION,
        "items": [{"alpha": [0.2, 0.3, 0.4], "epsilon": [0.5, 1.5], "translation": [0.1, 0.0, -0.1]}],
    }
    (params,) = list(composition_from_jsonable(data))
    np.testing.assert_allclose(params.alpha, [0.2, 0.3, 0.4])
    np.testing.assert_allclose(params.epsilon, [0.5, 1.5])
    np.testing.assert_allclose(params.euler, 0.0, atol=1e-12)
    np.testing.assert_allclose(params.translation, [0.1, 0.0, -0.1])


def test_schema_version_mismatch(mixed_scene):
    data = composition_to_jsonable(mixed_scene)
    data["schema_version"] = 2
    with pytest.raises(SchemaVersionMismatch):
        composition_from_jsonable(data)


@pytest.mark.parametrize(
    "key, value",
    [
        ("epsilon", [0.05, 1.0]),
        ("epsilon", [1.0, 2.5]),
        ("alpha", [0.2, -0.1, 0.3]),
        ("translation", [9.0, 9.0, 9.0]),
        ("raw", [0.0] * 10),
    ],
)
def test_invalid_items(mixed_scene, key, value):
    data = composition_to_jsonable(mixed_scene)
    data["items"][1][key] = value
    with pytest.raises(CompositionValidation):
        composition_from_jsonable(data)


def test_unreadable_files(tmp_path):
    with pytest.raises(ManifestParse):
        load_composition(tmp_path / "missing.json")
    (tmp_path / "broken.json").write_text("[1, 2")
    with pytest.raises(ManifestParse):
        load_composition(tmp_path / "broken.json")
