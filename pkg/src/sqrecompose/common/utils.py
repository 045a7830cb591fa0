""" sqrecompose.common.utils: defines common utility functions to be used across sub packages

Seeding helpers and the counter-based jitter stream used by the stratified ray sampler. Jitter is a pure function of
(seed, view id, pixel index, sample index) and does not depend on batching.
"""

import logging
import os
from typing import Optional

import numpy as np
import torch

from sqrecompose.constants import THREADS_ENV

LOGGER = logging.getLogger(__name__)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)
_MASK_64 = (1 << 64) - 1


def _splitmix64(values: np.ndarray) -> np.ndarray:
    """Finalizer of the splitmix64 generator applied element-wise (uint64 arithmetic wraps)"""
    values = values + _GOLDEN
    values = (values ^ (values >> np.uint64(30))) * _MIX_1
    values = (values ^ (values >> np.uint64(27))) * _MIX_2
    return values ^ (values >> np.uint64(31))


def derive_seed(seed: int, *stream: int) -> int:
    """Derive an independent 63-bit seed for a named sub-stream of a base seed

    Args:
        seed: base seed
        *stream: non-negative integers identifying the sub-stream (e.g. a stream tag and a step index)

    Returns:
        integer seed usable with numpy generators and the jitter hash
    """
    state = np.random.SeedSequence([seed & _MASK_64, *stream]).generate_state(
        1, dtype=np.uint64
    )
    return int(state[0] >> np.uint64(1))


def stratified_jitter(
    seed: int, view_ids: np.ndarray, pixel_ids: np.ndarray, samples: int
) -> np.ndarray:
    """Uniform [0, 1) offsets, one per (ray, sample), keyed by position

    Args:
        seed: render seed
        view_ids: view index of each ray, shape [R]
        pixel_ids: flat pixel index of each ray, shape [R]
        samples: samples per ray

    Returns:
        array of shape [R, samples]
    """
    key = _splitmix64(np.full(1, seed & _MASK_64, dtype=np.uint64))
    key = _splitmix64(key ^ np.asarray(view_ids, dtype=np.uint64))
    key = _splitmix64(key ^ np.asarray(pixel_ids, dtype=np.uint64))
    sample_keys = _splitmix64(np.arange(samples, dtype=np.uint64) * _GOLDEN)
    bits = _splitmix64(key[:, None] ^ sample_keys[None, :])
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def configure_threads(threads: Optional[int] = None) -> int:
    """Cap the torch intra-op worker pool

    Uses the supplied count, falling back to the environment variable, then to the torch default.

    Returns:
        effective number of threads
    """
    if threads is None:
        env_value = os.environ.get(THREADS_ENV, "").strip()
        if env_value:
            try:
                threads = int(env_value)
            except ValueError:
                LOGGER.warning("Ignoring non-integer %s=%s", THREADS_ENV, env_value)
    if threads is not None and threads >= 1:
        torch.set_num_threads(threads)
    return torch.get_num_threads()
