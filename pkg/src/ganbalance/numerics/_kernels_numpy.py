"""Pure-numpy reference implementations of the hot kernels.

Every function here has a numba twin in ``_kernels_numba`` with the same
signature and (up to float rounding in reductions) the same result. Keep the
two files in sync; ``tests/test_kernels.py`` compares them pairwise.
"""

import numpy as np


def conv1d_forward(x, filt):
    """Valid 1-d convolution over the time axis.

    Args:
        x: (B, L, D) input.
        filt: (W, D, F) filter bank.

    Returns:
        (B, L - W + 1, F) feature map.
    """
    w = filt.shape[0]
    p = x.shape[1] - w + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, w, axis=1)  # (B, P, D, W)
    return np.einsum("bpdw,wdf->bpf", windows, filt, optimize=True)


def conv1d_backward(x, filt, gout):
    """Gradients of conv1d_forward w.r.t. input and filters."""
    w, d, f = filt.shape
    b, p, _ = gout.shape
    gx = np.zeros_like(x)
    gfilt = np.zeros_like(filt)
    for k in range(w):
        gx[:, k : k + p, :] += gout @ filt[k].T
        gfilt[k] = np.einsum("bpd,bpf->df", x[:, k : k + p, :], gout, optimize=True)
    return gx, gfilt


def lstm_gates_forward(gates, c_prev):
    """Elementwise half of an LSTM cell, after the two matmuls.

    Gate layout along the last axis is [i, f, g, o], each of width H.

    Args:
        gates: (B, 4H) pre-activations.
        c_prev: (B, H) previous cell state.

    Returns:
        (h, c, ifgo, tc) where ifgo holds the activated gates for backward
        and tc is tanh(c).
    """
    hdim = c_prev.shape[1]
    i = _sigmoid(gates[:, 0 * hdim : 1 * hdim])
    f = _sigmoid(gates[:, 1 * hdim : 2 * hdim])
    g = np.tanh(gates[:, 2 * hdim : 3 * hdim])
    o = _sigmoid(gates[:, 3 * hdim : 4 * hdim])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    ifgo = np.concatenate([i, f, g, o], axis=1)
    return h, c, ifgo, tc


def lstm_gates_backward(ifgo, c_prev, tc, gh, gc):
    """Backward of lstm_gates_forward.

    Args:
        ifgo: (B, 4H) activated gates from the forward pass.
        c_prev: (B, H) previous cell state.
        tc: (B, H) tanh of the new cell state.
        gh: (B, H) gradient on h.
        gc: (B, H) gradient on c.

    Returns:
        (ggates, gc_prev) with ggates shaped (B, 4H).
    """
    hdim = c_prev.shape[1]
    i = ifgo[:, 0 * hdim : 1 * hdim]
    f = ifgo[:, 1 * hdim : 2 * hdim]
    g = ifgo[:, 2 * hdim : 3 * hdim]
    o = ifgo[:, 3 * hdim : 4 * hdim]
    gc_total = gc + gh * o * (1.0 - tc * tc)
    gi = gc_total * g * i * (1.0 - i)
    gf = gc_total * c_prev * f * (1.0 - f)
    gg = gc_total * i * (1.0 - g * g)
    go = gh * tc * o * (1.0 - o)
    ggates = np.concatenate([gi, gf, gg, go], axis=1)
    gc_prev = gc_total * f
    return ggates, gc_prev


def maxpool_time_forward(x):
    """Max over the time axis. x: (B, L, F) -> (out (B, F), argmax (B, F))."""
    arg = np.argmax(x, axis=1)
    out = np.take_along_axis(x, arg[:, None, :], axis=1)[:, 0, :]
    return out, arg.astype(np.int64)


def maxpool_time_backward(arg, gout, length):
    """Scatter gout back to the argmax positions."""
    b, f = gout.shape
    gx = np.zeros((b, length, f), dtype=gout.dtype)
    np.put_along_axis(gx, arg[:, None, :], gout[:, None, :], axis=1)
    return gx


def embedding_grad(ids, gout, vocab_size):
    """Scatter-add gradient rows into a fresh (V, D) table."""
    gtable = np.zeros((vocab_size, gout.shape[1]), dtype=gout.dtype)
    np.add.at(gtable, ids, gout)
    return gtable


def adam_update(param, grad, m, v, step, lr, beta1, beta2, eps):
    """One Adam step, in place on param, m and v. step is 1-based."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
