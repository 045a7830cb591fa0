""" sqrecompose.assets.composition_io: composition files

A composition file is JSON:

    {"schema_version": 1,
     "bounds": {"alpha_min": .., "eps_min": .., "eps_max": .., "alpha_softness": ..},
     "items": [{"alpha": [3], "epsilon": [2], "euler": [3], "translation": [3], "raw": [11]}, ...]}

Items are listed in insertion order. The raw vector is authoritative; the constrained values are written for
readability and checked for consistency on load. Items without a raw vector are built from their constrained values.
"""

import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from sqrecompose.model.superquadric import Composition, ShapeBounds, SuperquadricParams
from .types import CompositionValidation, ManifestParse, SchemaVersionMismatch

SCHEMA_VERSION = 1
CONSISTENCY_RTOL = 1e-9


def _item_jsonable(params: SuperquadricParams) -> Dict[str, Any]:
    return {
        "alpha": [float(v) for v in params.alpha],
        "epsilon": [float(v) for v in params.epsilon],
        "euler": [float(v) for v in params.euler],
        "translation": [float(v) for v in params.translation],
        "raw": [float(v) for v in params.raw],
    }


def composition_to_jsonable(composition: Composition) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "bounds": composition.bounds.to_jsonable(),
        "items": [_item_jsonable(item) for item in composition],
    }


def save_composition(composition: Composition, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(composition_to_jsonable(composition), indent=2) + "\n")
    return path


def _vector(item: Dict[str, Any], key: str, size: int, index: int) -> np.ndarray:
    try:
        values = np.asarray(item[key], dtype=np.float64).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise CompositionValidation(f"Item {index}: '{key}' is not numeric") from exc
    if values.size != size or not np.all(np.isfinite(values)):
        raise CompositionValidation(f"Item {index}: '{key}' must hold {size} finite values")
    return values


def _parse_item(item, index: int, bounds: ShapeBounds) -> SuperquadricParams:
    if not isinstance(item, dict):
        raise CompositionValidation(f"Item {index} is not an object")
    if "epsilon" in item:
        epsilon = _vector(item, "epsilon", 2, index)
        if np.any(epsilon < bounds.eps_min) or np.any(epsilon > bounds.eps_max):
            raise CompositionValidation(
                f"Item {index}: epsilon {epsilon.tolist()} outside [{bounds.eps_min}, {bounds.eps_max}]"
            )
    if "alpha" in item and np.any(_vector(item, "alpha", 3, index) <= 0):
        raise CompositionValidation(f"Item {index}: alpha must be positive")
    try:
        if "raw" in item:
            params = SuperquadricParams(_vector(item, "raw", 11, index), bounds)
        else:
            params = SuperquadricParams.from_constrained(
                _vector(item, "alpha", 3, index),
                _vector(item, "epsilon", 2, index),
                _vector(item, "euler", 3, index) if "euler" in item else np.zeros(3),
                _vector(item, "translation", 3, index) if "translation" in item else np.zeros(3),
                bounds,
            )
    except KeyError as exc:
        raise CompositionValidation(f"Item {index} has neither 'raw' nor '{exc.args[0]}'") from exc
    except ValueError as exc:
        raise CompositionValidation(f"Item {index}: {exc}") from exc
    for key, derived in (
        ("alpha", params.alpha),
        ("epsilon", params.epsilon),
        ("euler", params.euler),
        ("translation", params.translation),
    ):
        if key in item and not np.allclose(
            _vector(item, key, derived.size, index), derived, rtol=CONSISTENCY_RTOL, atol=1e-12
        ):
            raise CompositionValidation(f"Item {index}: '{key}' disagrees with its raw vector")
    return params


def composition_from_jsonable(data: Any, source: str = "<memory>") -> Composition:
    if not isinstance(data, dict):
        raise CompositionValidation(f"Composition file '{source}' must hold a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"Composition file '{source}' has schema version {version}, expected {SCHEMA_VERSION}"
        )
    record = data.get("bounds", {})
    try:
        bounds = ShapeBounds(
            float(record.get("alpha_min", ShapeBounds.alpha_min)),
            float(record.get("eps_min", ShapeBounds.eps_min)),
            float(record.get("eps_max", ShapeBounds.eps_max)),
            float(record.get("alpha_softness", ShapeBounds.alpha_softness)),
        )
    except (AttributeError, TypeError, ValueError) as exc:
        raise CompositionValidation(f"Composition file '{source}' has invalid bounds: {exc}") from exc
    items = data.get("items", [])
    if not isinstance(items, list):
        raise CompositionValidation(f"Composition file '{source}': 'items' must be a list")
    return Composition([_parse_item(item, index, bounds) for index, item in enumerate(items)], bounds)


def load_composition(path: Union[str, Path]) -> Composition:
    """Reads a composition file

    Raises:
        ManifestParse: unreadable file or invalid JSON
        SchemaVersionMismatch: unsupported schema version
        CompositionValidation: values violating the superquadric invariants
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestParse(f"Cannot read composition file '{path}': {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise ManifestParse(f"Composition file '{path}' is not valid JSON: {exc}") from exc
    return composition_from_jsonable(data, str(path))
