""" sqrecompose.assets.bundle: scene bundles of silhouette masks and calibrated cameras

A bundle is a directory holding a manifest 'scene.json' and one 8-bit single-channel PNG mask per view:

    {
      "name": "...", "seed": 7,
      "bounds": {"center": [x, y, z], "radius": r},
      "views": [{"mask": "v000.png", "fx": .., "fy": .., "cx": .., "cy": .., "width": W, "height": H,
                 "cam_to_world": [16 row-major floats]}, ...]
    }

Cameras look down +z of their own frame with x right and y down. Mask values are rescaled from [0, 255] to [0, 1].
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from sqrecompose.model.camera import CameraView, SceneBounds
from .types import AssetException, DimensionMismatch, ImageDecode, ManifestParse

LOGGER = logging.getLogger(__name__)

MANIFEST = "scene.json"


@dataclass
class SceneBundle:
    """Calibrated views with silhouettes plus the scene bounds"""

    views: List[CameraView]
    bounds: SceneBounds = field(default_factory=SceneBounds)
    name: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.views:
            raise AssetException("A scene bundle requires at least one view")
        for view in self.views:
            if view.silhouette.shape != (view.height, view.width):
                raise DimensionMismatch(
                    f"View {view.view_id}: silhouette {view.silhouette.shape} does not match {view.height}x{view.width}"
                )


def mask_name(index: int) -> str:
    return f"v{index:03d}.png"


def manifest_path(path: Union[str, Path]) -> Path:
    """The manifest of a bundle directory, or the path itself when it names a file"""
    path = Path(path)
    return path / MANIFEST if path.is_dir() or path.suffix != ".json" else path


def read_mask(path: Path) -> np.ndarray:
    """8-bit grayscale image rescaled to [0, 1]"""
    try:
        with Image.open(path) as image:
            if image.mode != "L":
                image = image.convert("L")
            pixels = np.asarray(image, dtype=np.float64)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise ImageDecode(f"Cannot decode silhouette image '{path}': {exc}", path) from exc
    return pixels / 255.0


def write_mask(path: Path, silhouette: np.ndarray):
    pixels = np.clip(np.round(np.asarray(silhouette) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(path)


def _number(record: dict, key: str, index: int, manifest: Path) -> float:
    try:
        value = float(record[key])
    except KeyError as exc:
        raise ManifestParse(f"View {index} of '{manifest}' has no '{key}'") from exc
    except (TypeError, ValueError) as exc:
        raise ManifestParse(f"View {index} of '{manifest}': '{key}' is not a number") from exc
    if not np.isfinite(value):
        raise ManifestParse(f"View {index} of '{manifest}': '{key}' is not finite")
    return value


def _parse_view(record, index: int, manifest: Path, load_masks: bool) -> CameraView:
    if not isinstance(record, dict):
        raise ManifestParse(f"View {index} of '{manifest}' is not an object")
    fx, fy, cx, cy = (_number(record, key, index, manifest) for key in ("fx", "fy", "cx", "cy"))
    width, height = (int(_number(record, key, index, manifest)) for key in ("width", "height"))
    if width < 1 or height < 1:
        raise ManifestParse(f"View {index} of '{manifest}' has an empty image size {width}x{height}")
    try:
        pose = np.asarray(record["cam_to_world"], dtype=np.float64)
    except KeyError as exc:
        raise ManifestParse(f"View {index} of '{manifest}' has no 'cam_to_world'") from exc
    except (TypeError, ValueError) as exc:
        raise ManifestParse(f"View {index} of '{manifest}': 'cam_to_world' is not numeric") from exc
    if pose.size != 16:
        raise ManifestParse(f"View {index} of '{manifest}': 'cam_to_world' needs 16 values, got {pose.size}")
    silhouette = None
    if load_masks:
        if not isinstance(record.get("mask"), str):
            raise ManifestParse(f"View {index} of '{manifest}' names no mask image")
        silhouette = read_mask(manifest.parent / record["mask"])
        if silhouette.shape != (height, width):
            raise DimensionMismatch(
                f"Mask '{record['mask']}' is {silhouette.shape[1]}x{silhouette.shape[0]}, "
                f"camera declares {width}x{height}"
            )
    return CameraView(fx, fy, cx, cy, pose.reshape(4, 4), width, height, silhouette, index)


def load_bundle(path: Union[str, Path], load_masks: bool = True) -> SceneBundle:
    """Reads a bundle directory (or manifest file)

    Raises:
        ManifestParse: missing or malformed manifest
        ImageDecode: a mask cannot be read, carries the offending path
        DimensionMismatch: a mask does not match its camera
        NonRigidPose: a camera pose is not a proper rigid transform
    """
    manifest = manifest_path(path)
    try:
        data = json.loads(manifest.read_text())
    except OSError as exc:
        raise ManifestParse(f"Cannot read scene manifest '{manifest}': {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise ManifestParse(f"Scene manifest '{manifest}' is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("views"), list) or not data["views"]:
        raise ManifestParse(f"Scene manifest '{manifest}' must hold a non-empty 'views' list")
    bounds_record = data.get("bounds", {})
    try:
        bounds = SceneBounds(
            tuple(bounds_record.get("center", (0.0, 0.0, 0.0))), float(bounds_record.get("radius", 1.0))
        )
    except (AttributeError, TypeError, ValueError) as exc:
        raise ManifestParse(f"Scene manifest '{manifest}' has invalid bounds: {exc}") from exc
    views = [
        _parse_view(record, index, manifest, load_masks) for index, record in enumerate(data["views"])
    ]
    seed = data.get("seed")
    LOGGER.debug("Loaded %d views from %s", len(views), manifest)
    return SceneBundle(
        views, bounds, str(data.get("name", "")), int(seed) if isinstance(seed, int) else None
    )


def save_bundle(bundle: SceneBundle, path: Union[str, Path]) -> Path:
    """Writes masks and manifest into a directory, returning the manifest path"""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for index, view in enumerate(bundle.views):
        write_mask(directory / mask_name(index), view.silhouette)
        records.append(
            {
                "mask": mask_name(index),
                "fx": float(view.fx),
                "fy": float(view.fy),
                "cx": float(view.cx),
                "cy": float(view.cy),
                "width": int(view.width),
                "height": int(view.height),
                "cam_to_world": [float(value) for value in view.cam_to_world.reshape(-1)],
            }
        )
    manifest = {
        "name": bundle.name,
        "seed": bundle.seed,
        "bounds": {"center": list(bundle.bounds.center), "radius": bundle.bounds.radius},
        "views": records,
    }
    target = directory / MANIFEST
    target.write_text(json.dumps(manifest, indent=2) + "\n")
    return target


def resize_view(view: CameraView, width: int, height: int) -> CameraView:
    """View rescaled to a new image size: intrinsics scaled, silhouette resampled bilinearly"""
    if (width, height) == (view.width, view.height):
        return view
    scale_x, scale_y = width / view.width, height / view.height
    image = Image.fromarray(view.silhouette.astype(np.float32))
    resized = image.resize((width, height), Image.Resampling.BILINEAR)
    silhouette = np.clip(np.asarray(resized, dtype=np.float64), 0.0, 1.0)
    return CameraView(
        view.fx * scale_x,
        view.fy * scale_y,
        view.cx * scale_x,
        view.cy * scale_y,
        view.cam_to_world,
        width,
        height,
        silhouette,
        view.view_id,
    )


def resize_views(views: Sequence[CameraView], image_size: int) -> List[CameraView]:
    """Views rescaled so that their longer side is image_size pixels (0 keeps native sizes)"""
    if image_size <= 0:
        return list(views)
    result = []
    for view in views:
        scale = image_size / max(view.width, view.height)
        width = max(1, int(round(view.width * scale)))
        height = max(1, int(round(view.height * scale)))
        result.append(resize_view(view, width, height))
    return result
