""" sqrecompose.model.superquadric: superquadric parameterization and implicit surface

A superquadric is described by 11 unconstrained reals (the raw vector). The constrained parameters are derived from
the raw vector through smooth maps so that any raw vector describes a valid primitive:

    raw[0:3]  -> alpha   = alpha_min + s softplus(raw / s)
    raw[3:5]  -> epsilon = eps_min + (eps_max - eps_min) * logistic(raw)
    raw[5:8]  -> euler   (radians, intrinsic Z-Y-X)
    raw[8:11] -> translation

The softness s keeps the scale map close to the identity above s, so that a step in raw space is a step of the same
size in scene units.

The batched tensor functions in this module operate on raw matrices of shape [K, 11] and are differentiable. The
numpy wrappers (implicit_value, world_to_canonical, density) evaluate a single primitive.
"""

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from sqrecompose.constants import (
    ALPHA_MIN_FRACTION,
    ALPHA_SOFTNESS_FRACTION,
    DTYPE,
    EPS_MAX,
    EPS_MIN,
    PARAM_COUNT,
    RATIO_FLOOR,
)

ArrayLike = Union[Sequence[float], np.ndarray]

ALPHA_SLICE = slice(0, 3)
EPSILON_SLICE = slice(3, 5)
EULER_SLICE = slice(5, 8)
TRANSLATION_SLICE = slice(8, 11)


@dataclass(frozen=True)
class ShapeBounds:
    """Bounds of the constrained reparameterization"""

    alpha_min: float = ALPHA_MIN_FRACTION
    eps_min: float = EPS_MIN
    eps_max: float = EPS_MAX
    alpha_softness: float = ALPHA_SOFTNESS_FRACTION

    def __post_init__(self):
        if not self.alpha_min > 0:
            raise ValueError(f"alpha_min must be positive, got {self.alpha_min}")
        if not self.alpha_softness > 0:
            raise ValueError(f"alpha_softness must be positive, got {self.alpha_softness}")
        if not 0 < self.eps_min < self.eps_max:
            raise ValueError(
                f"epsilon bounds must satisfy 0 < eps_min < eps_max, got [{self.eps_min}, {self.eps_max}]"
            )

    @classmethod
    def for_scene(
        cls, radius: float, eps_min: float = EPS_MIN, eps_max: float = EPS_MAX
    ) -> "ShapeBounds":
        """Bounds for a scene of the given bounding radius"""
        return cls(ALPHA_MIN_FRACTION * radius, eps_min, eps_max, ALPHA_SOFTNESS_FRACTION * radius)

    def to_jsonable(self):
        """Converts these bounds to a JSON serializable object"""
        return {
            "alpha_min": self.alpha_min,
            "eps_min": self.eps_min,
            "eps_max": self.eps_max,
            "alpha_softness": self.alpha_softness,
        }


def softplus_inverse(value: np.ndarray) -> np.ndarray:
    """Inverse of softplus for strictly positive input, stable for large values"""
    value = np.asarray(value, dtype=np.float64)
    return value + np.log(-np.expm1(-value))


def logit(value: np.ndarray) -> np.ndarray:
    """Inverse of the logistic function on (0, 1)"""
    value = np.asarray(value, dtype=np.float64)
    return np.log(value) - np.log1p(-value)


def constrain(
    raw: torch.Tensor, bounds: ShapeBounds
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Maps raw vectors [..., 11] to (alpha, epsilon, euler, translation)"""
    alpha = bounds.alpha_min + F.softplus(
        raw[..., ALPHA_SLICE], beta=1.0 / bounds.alpha_softness, threshold=50.0
    )
    epsilon = bounds.eps_min + (bounds.eps_max - bounds.eps_min) * torch.sigmoid(
        raw[..., EPSILON_SLICE]
    )
    return alpha, epsilon, raw[..., EULER_SLICE], raw[..., TRANSLATION_SLICE]


def rotation_matrix(euler: torch.Tensor) -> torch.Tensor:
    """Rotation matrices [..., 3, 3] from intrinsic Z-Y-X Euler angles [..., 3]

    R = Rz(euler[0]) @ Ry(euler[1]) @ Rx(euler[2])
    """
    cz, sz = torch.cos(euler[..., 0]), torch.sin(euler[..., 0])
    cy, sy = torch.cos(euler[..., 1]), torch.sin(euler[..., 1])
    cx, sx = torch.cos(euler[..., 2]), torch.sin(euler[..., 2])
    rows = [
        torch.stack([cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx], -1),
        torch.stack([sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx], -1),
        torch.stack([-sy, cy * sx, cy * cx], -1),
    ]
    return torch.stack(rows, -2)


def implicit_surface(
    canonical: torch.Tensor, alpha: torch.Tensor, epsilon: torch.Tensor
) -> torch.Tensor:
    """Inside-outside function f of canonical points (broadcast against alpha [..., 3] and epsilon [..., 2])

    f < 1 inside, f = 1 on the surface and f > 1 outside.
    """
    ratio = (canonical / alpha).abs().clamp_min(RATIO_FLOOR)
    eps_1 = epsilon[..., 0]
    eps_2 = epsilon[..., 1]
    planar = ratio[..., 0] ** (2.0 / eps_2) + ratio[..., 1] ** (2.0 / eps_2)
    return planar ** (eps_2 / eps_1) + ratio[..., 2] ** (2.0 / eps_1)


def to_canonical(
    points: torch.Tensor, rotation: torch.Tensor, translation: torch.Tensor
) -> torch.Tensor:
    """Applies R^T (x - t) with points, rotation [..., 3, 3] and translation [..., 3] broadcast together"""
    return torch.matmul((points - translation).unsqueeze(-2), rotation).squeeze(-2)


def transformed_implicit(
    points: torch.Tensor, raw: torch.Tensor, bounds: ShapeBounds
) -> torch.Tensor:
    """Evaluates f-hat of every primitive at shared world points

    Args:
        points: world points of shape [..., 3]
        raw: raw parameter matrix [K, 11]
        bounds: reparameterization bounds

    Returns:
        tensor of shape [K, ...]
    """
    count = raw.shape[0]
    spread = (1,) * (points.dim() - 1)
    alpha, epsilon, euler, translation = constrain(raw, bounds)
    rotation = rotation_matrix(euler).view(count, *spread, 3, 3)
    canonical = to_canonical(
        points.unsqueeze(0), rotation, translation.view(count, *spread, 3)
    )
    return implicit_surface(
        canonical, alpha.view(count, *spread, 3), epsilon.view(count, *spread, 2)
    )


def soft_occupancy(implicit: torch.Tensor, gamma: float) -> torch.Tensor:
    """Density sigma = logistic(gamma * (1 - f))"""
    return torch.sigmoid(gamma * (1.0 - implicit))


class SuperquadricParams:
    """One superquadric: an 11-vector of raw parameters plus the bounds used to constrain it

    Instances are immutable. Constrained values (alpha, epsilon, euler, translation) are derived on access.
    """

    __slots__ = ("_raw", "_bounds")

    def __init__(self, raw: ArrayLike, bounds: ShapeBounds = ShapeBounds()):
        raw = np.array(raw, dtype=np.float64).reshape(-1)
        if raw.shape != (PARAM_COUNT,):
            raise ValueError(
                f"Superquadric raw vector must have {PARAM_COUNT} entries, got {raw.shape[0]}"
            )
        if not np.all(np.isfinite(raw)):
            raise ValueError("Superquadric raw vector must be finite")
        raw.setflags(write=False)
        self._raw = raw
        self._bounds = bounds

    @classmethod
    def from_constrained(
        cls,
        alpha: ArrayLike,
        epsilon: ArrayLike,
        euler: ArrayLike = (0.0, 0.0, 0.0),
        translation: ArrayLike = (0.0, 0.0, 0.0),
        bounds: ShapeBounds = ShapeBounds(),
    ) -> "SuperquadricParams":
        """Builds a superquadric from constrained values, inverting the reparameterization"""
        alpha = np.asarray(alpha, dtype=np.float64)
        epsilon = np.asarray(epsilon, dtype=np.float64)
        if np.any(alpha <= bounds.alpha_min):
            raise ValueError(f"alpha {alpha} must exceed alpha_min {bounds.alpha_min}")
        if np.any(epsilon <= bounds.eps_min) or np.any(epsilon >= bounds.eps_max):
            raise ValueError(
                f"epsilon {epsilon} outside open interval ({bounds.eps_min}, {bounds.eps_max})"
            )
        span = bounds.eps_max - bounds.eps_min
        raw = np.concatenate(
            [
                bounds.alpha_softness * softplus_inverse((alpha - bounds.alpha_min) / bounds.alpha_softness),
                logit((epsilon - bounds.eps_min) / span),
                np.asarray(euler, dtype=np.float64),
                np.asarray(translation, dtype=np.float64),
            ]
        )
        return cls(raw, bounds)

    @classmethod
    def sphere(
        cls, center: ArrayLike, radius: float, bounds: ShapeBounds = ShapeBounds()
    ) -> "SuperquadricParams":
        """Sphere of the given radius at center, identity rotation"""
        return cls.from_constrained(
            [radius] * 3, [1.0, 1.0], (0.0, 0.0, 0.0), center, bounds
        )

    @property
    def raw(self) -> np.ndarray:
        """Read-only raw 11-vector"""
        return self._raw

    @property
    def bounds(self) -> ShapeBounds:
        return self._bounds

    def _constrained(self):
        with torch.no_grad():
            return [
                part.numpy()
                for part in constrain(torch.as_tensor(self._raw, dtype=DTYPE), self._bounds)
            ]

    @property
    def alpha(self) -> np.ndarray:
        return self._constrained()[0]

    @property
    def epsilon(self) -> np.ndarray:
        return self._constrained()[1]

    @property
    def euler(self) -> np.ndarray:
        return self._raw[EULER_SLICE].copy()

    @property
    def translation(self) -> np.ndarray:
        return self._raw[TRANSLATION_SLICE].copy()

    @property
    def rotation(self) -> np.ndarray:
        """3x3 rotation matrix of this primitive"""
        with torch.no_grad():
            return rotation_matrix(torch.as_tensor(self.euler, dtype=DTYPE)).numpy()

    def with_raw(self, raw: ArrayLike) -> "SuperquadricParams":
        return SuperquadricParams(raw, self._bounds)

    def __eq__(self, other):
        return (
            isinstance(other, SuperquadricParams)
            and self._bounds == other._bounds
            and np.array_equal(self._raw, other._raw)
        )

    def __hash__(self):
        return hash((self._raw.tobytes(), self._bounds))

    def __repr__(self):
        return (
            f"SuperquadricParams(alpha={self.alpha.round(4).tolist()}, epsilon={self.epsilon.round(4).tolist()}, "
            f"euler={self.euler.round(4).tolist()}, translation={self.translation.round(4).tolist()})"
        )


class Composition:
    """Ordered, immutable sequence of superquadrics

    Index i holds the primitive inserted at iteration i + 1. Updates (new values, appended primitives) produce new
    compositions and never reorder existing items.
    """

    def __init__(
        self,
        items: Iterable[SuperquadricParams] = (),
        bounds: ShapeBounds = ShapeBounds(),
    ):
        self._items = tuple(items)
        self._bounds = self._items[0].bounds if self._items else bounds
        if any(item.bounds != self._bounds for item in self._items):
            raise ValueError("All superquadrics of a composition must share bounds")

    @classmethod
    def from_raw_matrix(
        cls, raw: np.ndarray, bounds: ShapeBounds = ShapeBounds()
    ) -> "Composition":
        raw = np.asarray(raw, dtype=np.float64).reshape(-1, PARAM_COUNT)
        return cls((SuperquadricParams(row, bounds) for row in raw), bounds)

    @property
    def items(self) -> Tuple[SuperquadricParams, ...]:
        return self._items

    @property
    def bounds(self) -> ShapeBounds:
        return self._bounds

    def raw_matrix(self) -> np.ndarray:
        """Raw parameters as a [K, 11] array"""
        if not self._items:
            return np.zeros((0, PARAM_COUNT), dtype=np.float64)
        return np.stack([item.raw for item in self._items])

    def raw_tensor(self, requires_grad: bool = False) -> torch.Tensor:
        return torch.tensor(self.raw_matrix(), dtype=DTYPE, requires_grad=requires_grad)

    def appended(self, item: SuperquadricParams) -> "Composition":
        """New composition with item inserted last"""
        return Composition(self._items + (item,), self._bounds)

    def with_raw_matrix(self, raw: np.ndarray) -> "Composition":
        """New composition with the same order and updated values"""
        raw = np.asarray(raw, dtype=np.float64).reshape(-1, PARAM_COUNT)
        if raw.shape[0] != len(self._items):
            raise ValueError(
                f"Raw matrix has {raw.shape[0]} rows, composition has {len(self._items)} items"
            )
        return Composition.from_raw_matrix(raw, self._bounds)

    def prefix(self, count: int) -> "Composition":
        return Composition(self._items[:count], self._bounds)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[SuperquadricParams]:
        return iter(self._items)

    def __getitem__(self, index: int) -> SuperquadricParams:
        return self._items[index]

    def __eq__(self, other):
        return (
            isinstance(other, Composition)
            and self._bounds == other._bounds
            and self._items == other._items
        )

    def __repr__(self):
        return f"Composition({len(self._items)} superquadrics)"


def _single(params: SuperquadricParams) -> torch.Tensor:
    return torch.as_tensor(params.raw, dtype=DTYPE).unsqueeze(0)


def implicit_value(point: ArrayLike, params: SuperquadricParams) -> np.ndarray:
    """f(x; theta) of canonical-frame point(s) [..., 3]"""
    with torch.no_grad():
        alpha, epsilon, _, _ = constrain(_single(params)[0], params.bounds)
        value = implicit_surface(torch.as_tensor(point, dtype=DTYPE), alpha, epsilon)
    return value.numpy()


def world_to_canonical(point: ArrayLike, params: SuperquadricParams) -> np.ndarray:
    """x_canonical = R^T (x_world - t) for point(s) [..., 3]"""
    with torch.no_grad():
        _, _, euler, translation = constrain(_single(params)[0], params.bounds)
        canonical = to_canonical(
            torch.as_tensor(point, dtype=DTYPE), rotation_matrix(euler), translation
        )
    return canonical.numpy()


def canonical_to_world(point: ArrayLike, params: SuperquadricParams) -> np.ndarray:
    """Forward rigid map R x + t"""
    point = np.asarray(point, dtype=np.float64)
    return point @ params.rotation.T + params.translation


def density(point: ArrayLike, params: SuperquadricParams, gamma: float) -> np.ndarray:
    """sigma(x; theta) for world point(s) [..., 3]"""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    with torch.no_grad():
        implicit = transformed_implicit(
            torch.as_tensor(point, dtype=DTYPE), _single(params), params.bounds
        )[0]
        return soft_occupancy(implicit, gamma).numpy()


def signed_power(value: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """sign(x) |x|^e"""
    return np.sign(value) * np.abs(value) ** exponent


def surface_point(params: SuperquadricParams, eta: ArrayLike, omega: ArrayLike) -> np.ndarray:
    """World points of the parametric surface at latitude eta in [-pi/2, pi/2] and longitude omega in [-pi, pi]

    x = a1 cos(eta)^e1 cos(omega)^e2, y = a2 cos(eta)^e1 sin(omega)^e2, z = a3 sin(eta)^e1 with signed powers.
    """
    eta = np.asarray(eta, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    alpha, (eps_1, eps_2) = params.alpha, params.epsilon
    ring = signed_power(np.cos(eta), eps_1)
    canonical = np.stack(
        [
            alpha[0] * ring * signed_power(np.cos(omega), eps_2),
            alpha[1] * ring * signed_power(np.sin(omega), eps_2),
            alpha[2] * signed_power(np.sin(eta), eps_1) * np.ones_like(omega),
        ],
        -1,
    )
    return canonical_to_world(canonical, params)
