""" sqrecompose.fit.optim: Adam updates of raw superquadric parameters, the learning-rate schedule and the density
slope schedule

Each superquadric is its own parameter tensor of a torch.optim.Adam instance, so every primitive carries its own first
and second moments and its own step count. Primitives appended later start with fresh (zero) state while the moments of
existing primitives are kept.
"""

import math
from typing import List, Tuple

import numpy as np
import torch

from sqrecompose.constants import DTYPE, PARAM_COUNT

REFERENCE_RAYS = 500


def cosine_lr(step: int, total_steps: int, lr_start: float, lr_end: float) -> float:
    """lr_end + 0.5 (lr_start - lr_end)(1 + cos(pi step / total_steps))"""
    if total_steps <= 0:
        return lr_start
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + math.cos(math.pi * step / total_steps))


def annealed_gamma(step: int, steps: int, gamma_start: float, gamma_end: float) -> float:
    """Geometric interpolation from gamma_start at step 0 to gamma_end at the last of steps steps"""
    if not 0 <= step < max(steps, 1):
        raise ValueError(f"step {step} outside [0, {steps})")
    if steps <= 1:
        return gamma_start
    return gamma_start * (gamma_end / gamma_start) ** (step / (steps - 1))


def scale_lr_for_rays(lr: float, rays_per_view: int, reference: int = REFERENCE_RAYS) -> float:
    """Square-root scaling of a learning rate calibrated at the reference ray budget"""
    return lr * math.sqrt(rays_per_view / reference)


class AdamState:
    """Moments and step counts of every optimized superquadric, in composition order"""

    def __init__(self, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.betas = betas
        self.eps = eps
        self.rows: List[torch.Tensor] = []
        self.optimizer = None

    def __len__(self):
        return len(self.rows)

    def add_rows(self, raw: np.ndarray):
        """Registers new superquadrics (rows of raw) with zero moments"""
        for values in np.asarray(raw, dtype=np.float64).reshape(-1, PARAM_COUNT):
            row = torch.tensor(values, dtype=DTYPE, requires_grad=True)
            self.rows.append(row)
            if self.optimizer is None:
                self.optimizer = torch.optim.Adam(
                    [row], betas=self.betas, eps=self.eps, foreach=False
                )
            else:
                self.optimizer.add_param_group({"params": [row]})

    def steps(self) -> List[int]:
        """Number of updates applied to every row so far"""
        counts = []
        for row in self.rows:
            step = self.optimizer.state.get(row, {}).get("step", 0)
            counts.append(int(step))
        return counts


def adam_step(
    raw: np.ndarray, grads: np.ndarray, state: AdamState, lr: float
) -> np.ndarray:
    """One bias-corrected Adam update of all rows

    Rows of raw beyond those already known to the state are registered first.

    Returns:
        the updated raw matrix [K, 11]
    """
    raw = np.asarray(raw, dtype=np.float64).reshape(-1, PARAM_COUNT)
    grads = np.asarray(grads, dtype=np.float64).reshape(-1, PARAM_COUNT)
    if raw.shape != grads.shape:
        raise ValueError(f"Gradient shape {grads.shape} does not match parameters {raw.shape}")
    if raw.shape[0] < len(state):
        raise ValueError(
            f"Adam state tracks {len(state)} superquadrics, parameters have {raw.shape[0]}"
        )
    state.add_rows(raw[len(state):])
    if not state.rows:
        return raw.copy()
    with torch.no_grad():
        for row, values, grad in zip(state.rows, raw, grads):
            row.copy_(torch.as_tensor(values, dtype=DTYPE))
            row.grad = torch.as_tensor(grad, dtype=DTYPE).clone()
    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.step()
    return np.stack([row.detach().numpy().copy() for row in state.rows])
