import numpy as np
import pytest

from hydrofix.net import AdamState, TrainConfig, adam_step


def scalar_adam_oracle(theta, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook ADAM on a scalar, written independently of the module."""
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return theta


def test_zero_gradient_keeps_parameters():
    cfg = TrainConfig(learning_rate=0.1)
    params = {"w": np.array([1.0, -2.0], dtype=np.float32)}
    grads = {"w": np.zeros(2, dtype=np.float32)}
    state = AdamState.initial(params)
    new_params, new_state = adam_step(params, grads, state, cfg)
    assert np.array_equal(new_params["w"], params["w"])
    assert new_state.t == 1


def test_first_step_magnitude_close_to_lr():
    cfg = TrainConfig(learning_rate=1e-3)
    for g in (1e-6, 0.5, 3.0, -7.0):
        params = {"w": np.array([0.0], dtype=np.float64)}
        grads = {"w": np.array([g], dtype=np.float64)}
        new_params, _ = adam_step(params, grads, AdamState.initial(params), cfg)
        delta = float(new_params["w"][0])
        assert np.sign(delta) == -np.sign(g)
        assert 0.99 * cfg.learning_rate <= abs(delta) <= cfg.learning_rate


def test_quadratic_descent_matches_scalar_oracle():
    cfg = TrainConfig(learning_rate=0.1)
    params = {"theta": np.array([1.0], dtype=np.float64)}
    state = AdamState.initial(params)
    for _ in range(200):
        grads = {"theta": 2.0 * params["theta"]}
        params, state = adam_step(params, grads, state, cfg)
    assert abs(params["theta"][0]) < 0.05
    want = scalar_adam_oracle(1.0, lambda th: 2.0 * th, 0.1, 200)
    assert params["theta"][0] == pytest.approx(want, rel=1e-9)
    assert state.t == 200


def test_gradient_key_mismatch_rejected():
    cfg = TrainConfig()
    params = {"a": np.zeros(1)}
    with pytest.raises(ValueError):
        adam_step(params, {"b": np.zeros(1)}, AdamState.initial(params), cfg)
