import numpy as np
import pytest

from retrorank.numcore import AdamState, adam_step
from retrorank.numcore.autodiff import parameter


def adam_oracle(x0, grads, lr=0.001, b1=0.9, b2=0.999, eps=1e-8):
    """Hand-rolled scalar Adam recurrence."""
    x, m, v = x0, 0.0, 0.0
    trajectory = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
        trajectory.append(x)
    return trajectory


def test_zero_grad_leaves_params_unchanged():
    p = parameter([1.0, -2.0, 3.0])
    p.grad = np.zeros(3)
    state = AdamState()
    adam_step({"p": p}, state)
    np.testing.assert_array_equal(p.value, [1.0, -2.0, 3.0])
    assert state.step_count == 1


def test_first_step_magnitude_is_learning_rate():
    p = parameter(np.array(0.0))
    p.grad = np.asarray(1.0)
    state = AdamState(learning_rate=0.001)
    adam_step({"p": p}, state)
    # bias-corrected moments cancel: step = lr / (1 + eps)
    assert float(p.value) == pytest.approx(-0.001, rel=1e-6)


def test_three_steps_on_quadratic_match_oracle():
    # f(x) = x^2 / 2, grad = x, starting at 1.0
    p = parameter(np.array(1.0))
    state = AdamState(learning_rate=0.1)
    grads = []
    seen = []
    for _ in range(3):
        grads.append(float(p.value))
        p.grad = np.asarray(float(p.value))
        adam_step({"p": p}, state)
        seen.append(float(p.value))
        p.grad = None
    np.testing.assert_allclose(seen, adam_oracle(1.0, grads, lr=0.1), rtol=1e-12)


def test_step_count_increments():
    p = parameter([0.0])
    state = AdamState()
    for expected in (1, 2, 3):
        p.grad = np.array([0.5])
        adam_step({"p": p}, state)
        assert state.step_count == expected


def test_shape_mismatch_rejected():
    p = parameter([1.0, 2.0])
    p.grad = np.zeros(3)
    with pytest.raises(ValueError, match="shape"):
        adam_step({"p": p}, AdamState())


def test_missing_grad_counts_as_zero():
    p = parameter([5.0])
    q = parameter([1.0])
    q.grad = np.array([1.0])
    state = AdamState(learning_rate=0.01)
    adam_step({"p": p, "q": q}, state)
    np.testing.assert_array_equal(p.value, [5.0])
    assert float(q.value) != 1.0
