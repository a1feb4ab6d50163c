"""The numba kernels and their numpy twins must agree."""

import subprocess
import sys

import numpy as np
import pytest

from ganbalance.numerics import _kernels_numpy as knp

knb = pytest.importorskip("ganbalance.numerics._kernels_numba")


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(42)


def test_conv1d_pair(rng):
    x = rng.normal(size=(3, 9, 5))
    filt = rng.normal(size=(3, 5, 7))
    a = knp.conv1d_forward(x, filt)
    b = knb.conv1d_forward(x, filt)
    assert np.allclose(a, b, atol=1e-12)
    gout = rng.normal(size=a.shape)
    gx1, gf1 = knp.conv1d_backward(x, filt, gout)
    gx2, gf2 = knb.conv1d_backward(x, filt, gout)
    assert np.allclose(gx1, gx2, atol=1e-12)
    assert np.allclose(gf1, gf2, atol=1e-12)


def test_lstm_gates_pair(rng):
    gates = rng.normal(size=(4, 24))
    c = rng.normal(size=(4, 6))
    h1, c1, ifgo1, tc1 = knp.lstm_gates_forward(gates, c)
    h2, c2, ifgo2, tc2 = knb.lstm_gates_forward(gates, c)
    for a, b in ((h1, h2), (c1, c2), (ifgo1, ifgo2), (tc1, tc2)):
        assert np.allclose(a, b, atol=1e-14)
    gh = rng.normal(size=(4, 6))
    gc = rng.normal(size=(4, 6))
    gg1, gp1 = knp.lstm_gates_backward(ifgo1, c, tc1, gh, gc)
    gg2, gp2 = knb.lstm_gates_backward(ifgo2, c, tc2, gh, gc)
    assert np.allclose(gg1, gg2, atol=1e-13)
    assert np.allclose(gp1, gp2, atol=1e-13)


def test_maxpool_pair(rng):
    x = rng.normal(size=(5, 8, 3))
    o1, a1 = knp.maxpool_time_forward(x)
    o2, a2 = knb.maxpool_time_forward(x)
    assert np.array_equal(o1, o2)
    assert np.array_equal(a1, a2)
    gout = rng.normal(size=o1.shape)
    assert np.array_equal(
        knp.maxpool_time_backward(a1, gout, 8),
        knb.maxpool_time_backward(a2, gout, 8),
    )


def test_embedding_grad_pair(rng):
    ids = rng.integers(0, 10, size=20)
    gout = rng.normal(size=(20, 4))
    a = knp.embedding_grad(ids, gout, 10)
    b = knb.embedding_grad(ids, gout, 10)
    assert np.allclose(a, b, atol=1e-12)


def test_adam_pair(rng):
    p1 = rng.normal(size=17)
    p2 = p1.copy()
    g = rng.normal(size=17)
    m1, v1 = np.zeros(17), np.zeros(17)
    m2, v2 = np.zeros(17), np.zeros(17)
    for step in range(1, 4):
        knp.adam_update(p1, g, m1, v1, step, 1e-2, 0.9, 0.999, 1e-8)
        knb.adam_update(p2, g, m2, v2, step, 1e-2, 0.9, 0.999, 1e-8)
    assert np.allclose(p1, p2, atol=1e-14)
    assert np.allclose(m1, m2, atol=1e-14)
    assert np.allclose(v1, v2, atol=1e-14)


def test_env_flag_selects_numpy_backend():
    code = (
        "import os; os.environ['GANBALANCE_NUMBA'] = '0'; "
        "from ganbalance.numerics import kernels; print(kernels.BACKEND)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "numpy"
