"""
(test) sqrecompose.fit.optim:

Tests the cosine learning-rate schedule and the per-superquadric Adam state.
"""

import numpy as np
import pytest

from sqrecompose.fit.optim import AdamState, adam_step, annealed_gamma, cosine_lr, scale_lr_for_rays


def test_cosine_schedule_endpoints():
    assert cosine_lr(0, 100, 0.01, 0.001) == pytest.approx(0.01)
    assert cosine_lr(50, 100, 0.01, 0.001) == pytest.approx(0.0055)
    assert cosine_lr(100, 100, 0.01, 0.001) == pytest.approx(0.001)
    assert cosine_lr(0, 0, 0.01, 0.001) == 0.01
    with pytest.raises(ValueError):
        cosine_lr(101, 100, 0.01, 0.001)


def test_cosine_schedule_is_monotone():
    rates = [cosine_lr(step, 40, 0.02, 0.002) for step in range(41)]
    assert all(later <= earlier for earlier, later in zip(rates, rates[1:]))


def test_ray_budget_scaling():
    assert scale_lr_for_rays(0.01, 500) == pytest.approx(0.01)
    assert scale_lr_for_rays(0.01, 2000) == pytest.approx(0.02)
    assert scale_lr_for_rays(0.01, 125) == pytest.approx(0.005)


def test_first_step_moves_by_learning_rate():
    state = AdamState()
    raw = np.zeros((1, 11))
    grads = np.linspace(-1.0, 1.0, 11).reshape(1, 11)
    grads[0, 5] = 0.3
    updated = adam_step(raw, grads, state, 0.01)
    # bias-corrected first step: -lr * sign(g) for every non-zero gradient
    np.testing.assert_allclose(updated, -0.01 * np.sign(grads), atol=1e-7)
    assert state.steps() == [1]


def test_zero_gradient_keeps_parameters():
    state = AdamState()
    raw = np.arange(22, dtype=np.float64).reshape(2, 11)
    np.testing.assert_allclose(adam_step(raw, np.zeros_like(raw), state, 0.1), raw)


def test_appended_superquadric_starts_fresh():
    state = AdamState()
    raw = np.zeros((1, 11))
    for _ in range(3):
        raw = adam_step(raw, np.ones((1, 11)), state, 0.01)
    grown = np.vstack([raw, np.zeros((1, 11))])
    updated = adam_step(grown, np.ones((2, 11)), state, 0.01)
    assert state.steps() == [4, 1]
    assert len(state) == 2
    np.testing.assert_allclose(updated[1], -0.01, atol=1e-7)
    np.testing.assert_allclose(updated[0], raw[0] - 0.01, atol=1e-7)


def test_shape_errors():
    state = AdamState()
    with pytest.raises(ValueError):
        adam_step(np.zeros((2, 11)), np.zeros((1, 11)), state, 0.01)
    adam_step(np.zeros((2, 11)), np.zeros((2, 11)), state, 0.01)
    with pytest.raises(ValueError):
        adam_step(np.zeros((1, 11)), np.zeros((1, 11)), state, 0.01)


def test_empty_parameters():
    assert adam_step(np.zeros((0, 11)), np.zeros((0, 11)), AdamState(), 0.01).shape == (0, 11)


def test_annealed_slope_is_geometric():
    assert annealed_gamma(0, 5, 20.0, 150.0) == pytest.approx(20.0)
    assert annealed_gamma(4, 5, 20.0, 150.0) == pytest.approx(150.0)
    assert annealed_gamma(2, 5, 20.0, 180.0) == pytest.approx(60.0)
    assert annealed_gamma(0, 1, 20.0, 150.0) == 20.0
    assert annealed_gamma(0, 0, 20.0, 150.0) == 20.0
    with pytest.raises(ValueError):
        annealed_gamma(5, 5, 20.0, 150.0)
