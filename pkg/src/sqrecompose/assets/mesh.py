""" sqrecompose.assets.mesh: Wavefront OBJ export of compositions

Every superquadric becomes one group 'superquadric_<k>' of a closed triangle mesh sampled from the parametric surface.
Latitude rings exclude the poles at eta = +-pi/2, which are closed with triangle fans around one pole vertex each.
Faces are wound counter-clockwise seen from outside.
"""

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from sqrecompose.model.superquadric import Composition, SuperquadricParams, surface_point
from sqrecompose.model.types import EmptyComposition

MIN_DENSITY = 4


def tessellate(params: SuperquadricParams, density: int) -> Tuple[np.ndarray, np.ndarray]:
    """Vertices [V, 3] and zero-based triangles [F, 3] of one superquadric

    density is the number of longitude segments; density // 2 latitude bands span pole to pole.
    """
    if density < MIN_DENSITY:
        raise ValueError(f"Tessellation density must be at least {MIN_DENSITY}, got {density}")
    segments = density
    bands = max(2, density // 2)
    eta = -0.5 * np.pi + np.pi * np.arange(1, bands) / bands
    omega = -np.pi + 2.0 * np.pi * np.arange(segments) / segments
    rings = surface_point(params, eta[:, None], omega[None, :]).reshape(-1, 3)
    poles = surface_point(params, np.array([-0.5 * np.pi, 0.5 * np.pi]), np.zeros(2))
    vertices = np.concatenate([rings, poles])
    south, north = len(rings), len(rings) + 1

    def at(ring: int, segment: int) -> int:
        return ring * segments + segment % segments

    faces: List[Tuple[int, int, int]] = []
    for ring in range(bands - 2):
        for segment in range(segments):
            faces.append((at(ring, segment), at(ring, segment + 1), at(ring + 1, segment + 1)))
            faces.append((at(ring, segment), at(ring + 1, segment + 1), at(ring + 1, segment)))
    top = bands - 2
    for segment in range(segments):
        faces.append((south, at(0, segment + 1), at(0, segment)))
        faces.append((at(top, segment), at(top, segment + 1), north))
    return vertices, np.asarray(faces, dtype=np.int64)


def export_mesh(composition: Composition, path: Union[str, Path], density: int = 64) -> Path:
    """Writes an OBJ file with one group per superquadric

    Raises:
        EmptyComposition: nothing to export
    """
    if len(composition) == 0:
        raise EmptyComposition("Cannot export a mesh of an empty composition")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {len(composition)} superquadrics"]
    offset = 1
    for index, params in enumerate(composition):
        vertices, faces = tessellate(params, density)
        lines.append(f"g superquadric_{index}")
        lines.extend(f"v {x:.9f} {y:.9f} {z:.9f}" for x, y, z in vertices)
        lines.extend(f"f {a + offset} {b + offset} {c + offset}" for a, b, c in faces)
        offset += len(vertices)
    path.write_text("\n".join(lines) + "\n")
    return path
