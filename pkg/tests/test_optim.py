"""Adam semantics: bias correction, state lifecycle, error paths."""

import numpy as np
import pytest

from tseg import autodiff as ad
from tseg.errors import ContractError
from tseg.optim import Parameter, adam_step


def _param(values, name="p"):
    return Parameter(np.asarray(values, dtype=np.float32), name=name)


def test_first_step_magnitude_is_lr():
    # with bias correction, |update| ~= lr on step 1 for any nonzero
    # gradient; eps shifts it by a relative eps/|g|
    for g in (0.5, -3.0, 1e-4):
        p = _param([1.0])
        p.tensor.grad = np.array([g], dtype=np.float32)
        adam_step([p], lr=0.01)
        tol = 0.01 * (1e-8 / abs(g) + 1e-5)
        assert abs(abs(1.0 - p.data[0]) - 0.01) < tol, f"grad {g}"


def test_first_step_frozen_value():
    p = _param([1.0])
    p.tensor.grad = np.array([0.5], dtype=np.float32)
    adam_step([p], lr=0.01)
    expected = 1.0 - 0.01 * 0.5 / (np.sqrt(0.25) + 1e-8)
    assert p.data[0] == pytest.approx(expected, rel=1e-6)


def test_two_steps_match_reference_formula():
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    rng = np.random.default_rng(0)
    theta = rng.standard_normal(8).astype(np.float32)
    grads = [rng.standard_normal(8).astype(np.float32) for _ in range(2)]

    ref = theta.astype(np.float64).copy()
    m = np.zeros(8)
    v = np.zeros(8)
    for t, g in enumerate(grads, start=1):
        g = g.astype(np.float64)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        ref -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)

    p = Parameter(theta.copy(), name="w")
    for g in grads:
        p.tensor.grad = g.copy()
        adam_step([p], lr=lr)
    np.testing.assert_allclose(p.data, ref.astype(np.float32), rtol=1e-5, atol=1e-7)
    assert p.step_count == 2


def test_missing_grad_is_rejected_before_any_update():
    a, b = _param([1.0], "a"), _param([2.0], "b")
    a.tensor.grad = np.array([1.0], dtype=np.float32)
    with pytest.raises(ContractError, match="b"):
        adam_step([a, b], lr=0.1)
    assert a.data[0] == 1.0  # nothing moved


def test_grads_cleared_after_step():
    p = _param([1.0])
    p.tensor.grad = np.array([1.0], dtype=np.float32)
    adam_step([p], lr=0.01)
    assert p.grad is None


def test_state_shapes_track_parameter():
    p = _param(np.zeros((3, 4)))
    p.tensor.grad = np.ones((3, 4), dtype=np.float32)
    adam_step([p], lr=0.01)
    assert p.adam_m.shape == (3, 4) and p.adam_v.shape == (3, 4)


def test_astype_resets_optimizer_state():
    p = _param([1.0])
    p.tensor.grad = np.array([1.0], dtype=np.float32)
    adam_step([p], lr=0.01)
    q = p.astype(np.float64)
    assert q.data.dtype == np.float64
    assert q.step_count == 0
    assert not q.adam_m.any() and not q.adam_v.any()
    assert p.step_count == 1  # original untouched


def test_zero_grad_tensor_is_a_valid_grad():
    p = _param([1.0])
    p.tensor.grad = np.zeros(1, dtype=np.float32)
    adam_step([p], lr=0.01)
    assert p.data[0] == pytest.approx(1.0)
