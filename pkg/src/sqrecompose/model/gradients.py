""" sqrecompose.model.gradients: exact loss gradients with respect to raw superquadric parameters

Gradients are the reverse-mode derivative (torch autograd) of the discretized estimator implemented in the render
module, i.e. of exactly the loss that is evaluated, not of the continuous integral. Rays are processed in fixed-order
chunks whose gradients accumulate into a single buffer, so results are deterministic for a given batch and seed.

fd_check compares these gradients against central finite differences of the same discretized loss.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch

from sqrecompose.constants import DTYPE
from .objective import RayBatch, ray_weights, weighted_square_errors
from .render import RenderConfig, composition_opacity, iter_chunks, march_segments
from .superquadric import Composition
from .types import InvalidRayBatch, NonFiniteGradient

LOGGER = logging.getLogger(__name__)

SIGNIFICANT = 1e-8
GRAD_CHUNK = 1024


@dataclass
class ParamGradient:
    """dL/draw for every superquadric, rows aligned with composition order"""

    values: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass
class BatchEvaluation:
    """Loss, gradient and per-ray diagnostics of one batch"""

    loss: float
    gradient: ParamGradient
    ray_losses: np.ndarray
    rendered: np.ndarray


def evaluate_batch(
    batch: RayBatch,
    composition: Composition,
    config: RenderConfig,
    lam: float,
    with_gradient: bool = True,
    chunk: int = GRAD_CHUNK,
) -> BatchEvaluation:
    """Weighted loss of a batch and (optionally) its gradient

    Raises:
        InvalidRayBatch: empty batch
        NonFiniteGradient: a gradient entry is NaN or Inf
    """
    if len(batch) == 0:
        raise InvalidRayBatch("Gradient evaluation requires a non-empty ray batch")
    weights = torch.as_tensor(ray_weights(batch.targets, lam), dtype=DTYPE)
    targets = torch.as_tensor(batch.targets, dtype=DTYPE)
    raw = composition.raw_tensor(requires_grad=with_gradient)
    ray_losses = np.zeros(len(batch), dtype=np.float64)
    rendered = np.zeros(len(batch), dtype=np.float64)
    total = 0.0
    with torch.set_grad_enabled(with_gradient):
        for part in iter_chunks(len(batch), chunk):
            segments = march_segments(batch.rays.take(part), config)
            opacity = composition_opacity(segments, raw, composition.bounds, config.gamma)
            errors = weighted_square_errors(opacity, targets[part], weights[part])
            chunk_loss = errors.sum()
            if chunk_loss.requires_grad:
                chunk_loss.backward()
            total += float(chunk_loss.detach())
            ray_losses[part] = errors.detach().numpy()
            rendered[part] = opacity.detach().numpy()
    if with_gradient and raw.grad is not None:
        values = raw.grad.numpy().copy()
    else:
        values = np.zeros(raw.shape, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))
        raise NonFiniteGradient(
            f"Non-finite gradient at (primitive, parameter) entries {bad.tolist()}", bad
        )
    return BatchEvaluation(total, ParamGradient(values), ray_losses, rendered)


def loss_and_grad(
    batch: RayBatch, composition: Composition, config: RenderConfig, lam: float
) -> Tuple[float, ParamGradient]:
    """Weighted loss and its exact gradient with respect to all raw parameters"""
    evaluation = evaluate_batch(batch, composition, config, lam)
    return evaluation.loss, evaluation.gradient


def fd_check(
    composition: Composition,
    batch: RayBatch,
    config: RenderConfig,
    lam: float,
    step: float = 1e-4,
) -> float:
    """Largest relative error between analytic and central-difference gradients

    Entries where |analytic| + |fd| <= 1e-8 are ignored. An empty batch or composition checks trivially (0).
    """
    if not step > 0:
        raise ValueError(f"Finite-difference step must be positive, got {step}")
    if len(batch) == 0 or len(composition) == 0:
        return 0.0
    analytic = evaluate_batch(batch, composition, config, lam).gradient.values
    raw = composition.raw_matrix()
    worst = 0.0
    for index in np.ndindex(raw.shape):
        shifted = []
        for sign in (1.0, -1.0):
            shifted_raw = raw.copy()
            shifted_raw[index] += sign * step
            shifted.append(
                evaluate_batch(
                    batch, composition.with_raw_matrix(shifted_raw), config, lam, with_gradient=False
                ).loss
            )
        numeric = (shifted[0] - shifted[1]) / (2.0 * step)
        exact = analytic[index]
        if abs(exact) + abs(numeric) > SIGNIFICANT:
            worst = max(worst, abs(exact - numeric) / max(abs(exact), abs(numeric)))
    LOGGER.debug("Finite-difference check: max relative error %.3e", worst)
    return worst
