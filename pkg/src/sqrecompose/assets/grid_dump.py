""" sqrecompose.assets.grid_dump: raw voxel grid dumps for external visualization

A dump is a pair of files: '<stem>.raw' holds N^3 little-endian 32-bit floats in C order over [x, y, z] and
'<stem>.json' holds the header {"resolution": N, "center": [3], "spacing": l, "dtype": "<f4"}.
"""

import json
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from sqrecompose.fit.seeder import VoxelGrid
from .types import ManifestParse

RAW_DTYPE = "<f4"


def dump_grid(grid: VoxelGrid, stem: Union[str, Path]) -> Tuple[Path, Path]:
    """Writes the raw values and the header next to each other, returning both paths"""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    raw_path, header_path = stem.with_suffix(".raw"), stem.with_suffix(".json")
    raw_path.write_bytes(np.ascontiguousarray(grid.values, dtype=RAW_DTYPE).tobytes())
    header = {
        "resolution": grid.resolution,
        "center": [float(c) for c in grid.center],
        "spacing": float(grid.spacing),
        "dtype": RAW_DTYPE,
    }
    header_path.write_text(json.dumps(header, indent=2) + "\n")
    return raw_path, header_path


def load_grid(stem: Union[str, Path]) -> VoxelGrid:
    """Reads a dump back (values at 32-bit precision)"""
    stem = Path(stem)
    try:
        header = json.loads(stem.with_suffix(".json").read_text())
        values = np.frombuffer(stem.with_suffix(".raw").read_bytes(), dtype=header["dtype"])
        resolution = int(header["resolution"])
        return VoxelGrid(
            resolution,
            header["center"],
            float(header["spacing"]),
            values.astype(np.float64).reshape((resolution,) * 3),
        )
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ManifestParse(f"Cannot read grid dump '{stem}': {exc}") from exc
