"""Optimizer update rules against closed forms and a reference recursion."""

import numpy as np
import pytest

from csiloc.nn.layers import ShapeMismatch
from csiloc.nn.optim import Adam, Sgd, make_optimizer


def test_sgd_single_step():
    opt = Sgd(learning_rate=0.1)
    p = np.array([1.0])
    opt.step([p], [np.array([0.5])])
    assert p[0] == pytest.approx(0.95, abs=1e-15)


def test_sgd_keeps_dtype():
    opt = Sgd(learning_rate=0.1)
    p = np.ones(3, dtype=np.float32)
    opt.step([p], [np.full(3, 0.5, dtype=np.float32)])
    assert p.dtype == np.float32
    np.testing.assert_allclose(p, 0.95, rtol=1e-6)


def test_adam_first_step_closed_form():
    lr, eps = 0.001, 1e-8
    opt = Adam(learning_rate=lr, epsilon=eps)
    p = np.array([1.0])
    opt.step([p], [np.array([1.0])])
    # m_hat = v_hat = 1 after one unit-gradient step
    assert p[0] == pytest.approx(1.0 - lr / (1.0 + eps), abs=1e-16)
    assert opt.step_count == 1


def test_adam_zero_gradient_is_noop():
    opt = Adam()
    p = np.array([3.0, -2.0])
    for _ in range(5):
        opt.step([p], [np.zeros(2)])
    np.testing.assert_array_equal(p, [3.0, -2.0])
    assert opt.step_count == 5


def test_adam_matches_reference_recursion():
    # independent scalar recursion, straight from the published update rule
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    rng = np.random.default_rng(0)
    grads = rng.normal(size=10)

    theta = 0.5
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)

    opt = Adam(learning_rate=lr, beta1=b1, beta2=b2, epsilon=eps)
    p = np.array([0.5])
    for g in grads:
        opt.step([p], [np.array([g])])
    assert p[0] == pytest.approx(theta, abs=1e-15)


def test_adam_moments_stay_float64():
    opt = Adam()
    p = np.ones(4, dtype=np.float32)
    opt.step([p], [np.full(4, 0.25, dtype=np.float32)])
    assert p.dtype == np.float32
    assert opt.m[0].dtype == np.float64
    assert opt.v[0].dtype == np.float64


def test_adam_monotone_descent_on_quadratic():
    # f(x) = x^2, gradient 2x: iterates must approach the minimum
    opt = Adam(learning_rate=0.05)
    p = np.array([2.0])
    values = [p[0] ** 2]
    for _ in range(200):
        opt.step([p], [2.0 * p])
        values.append(p[0] ** 2)
    assert values[-1] < 1e-3
    assert values[-1] < values[0]


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatch):
        Sgd().step([np.zeros(2)], [np.zeros(3)])
    with pytest.raises(ShapeMismatch):
        Sgd().step([np.zeros(2)], [])
    opt = Adam()
    opt.step([np.zeros(2)], [np.zeros(2)])
    with pytest.raises(ShapeMismatch):
        opt.step([np.zeros(2), np.zeros(1)], [np.zeros(2), np.zeros(1)])


def test_make_optimizer():
    assert isinstance(make_optimizer("adam", 0.01), Adam)
    assert isinstance(make_optimizer("sgd", 0.1), Sgd)
    assert make_optimizer("sgd", 0.1).learning_rate == 0.1
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 0.1)
