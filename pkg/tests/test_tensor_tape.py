import numpy as np
import pytest

from ganbalance.errors import ShapeError
from ganbalance.numerics import Tape, Tensor, backward, ops


def test_square_gradient():
    x = Tensor(3.0, requires_grad=True)
    with Tape():
        loss = ops.mean(ops.mul(x, x))
    backward(loss)
    assert x.grad == pytest.approx(6.0)


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(4), requires_grad=True)
    with Tape() as tape:
        y = ops.mul(x, x)
        with pytest.raises(ShapeError):
            tape.backward(y)


def test_backward_without_tape_raises():
    x = Tensor(2.0, requires_grad=True)
    y = ops.mul(x, x)  # no tape open, nothing recorded
    with pytest.raises(ValueError):
        backward(y)
    assert x.grad is None


def test_unreachable_leaf_gets_zero_grad():
    a = Tensor(np.ones(3), requires_grad=True)
    b = Tensor(np.ones(3) * 2, requires_grad=True)
    c = Tensor(np.ones(3) * 5, requires_grad=True)
    with Tape():
        loss = ops.mean(ops.mul(a, b))
        ops.mul(c, Tensor(2.0))  # recorded but not part of the loss
    backward(loss)
    assert np.array_equal(c.grad, np.zeros(3))
    assert np.allclose(a.grad, b.data / 3)


def test_grad_accumulates_across_backward_calls():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    for _ in range(2):
        with Tape():
            loss = ops.tsum(ops.mul(x, x))
        backward(loss)
    assert np.allclose(x.grad, 4 * x.data)


def test_requires_grad_propagation():
    a = Tensor(np.ones(3))
    b = Tensor(np.ones(3))
    with Tape() as tape:
        out = ops.add(a, b)
    assert not out.requires_grad
    assert tape.entries == []


def test_detach_blocks_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Tape():
        loss = ops.tsum(ops.mul(x.detach(), x))
    backward(loss)
    assert np.allclose(x.grad, x.data)


def test_same_tensor_used_twice_accumulates():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    with Tape():
        loss = ops.tsum(ops.add(ops.mul(x, x), x))
    backward(loss)
    assert np.allclose(x.grad, 2 * x.data + 1)


def test_forward_backward_values_stay_finite():
    rng = np.random.default_rng(11)
    w1 = Tensor(rng.normal(size=(6, 5)), requires_grad=True)
    w2 = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    x = Tensor(rng.normal(size=(4, 6)))
    with Tape():
        hid = ops.tanh(ops.matmul(x, w1))
        logits = ops.matmul(hid, w2)
        loss = ops.cross_entropy(logits, np.array([0, 1, 2, 1]))
    backward(loss)
    assert np.isfinite(loss.data).all()
    assert np.isfinite(w1.grad).all()
    assert np.isfinite(w2.grad).all()
