"""Numba twins of the kernels in ``_kernels_numpy``.

Same signatures, explicit loops. Serial on purpose: results must not depend
on thread count.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv1d_forward(x, filt):
    b, l, d = x.shape
    w, _, f = filt.shape
    p = l - w + 1
    out = np.zeros((b, p, f), dtype=np.float64)
    for bi in range(b):
        for pi in range(p):
            for wi in range(w):
                for di in range(d):
                    xv = x[bi, pi + wi, di]
                    for fi in range(f):
                        out[bi, pi, fi] += xv * filt[wi, di, fi]
    return out


@njit(cache=True)
def conv1d_backward(x, filt, gout):
    b, l, d = x.shape
    w, _, f = filt.shape
    p = gout.shape[1]
    gx = np.zeros_like(x)
    gfilt = np.zeros_like(filt)
    for bi in range(b):
        for pi in range(p):
            for wi in range(w):
                for di in range(d):
                    acc = 0.0
                    xv = x[bi, pi + wi, di]
                    for fi in range(f):
                        g = gout[bi, pi, fi]
                        acc += g * filt[wi, di, fi]
                        gfilt[wi, di, fi] += xv * g
                    gx[bi, pi + wi, di] += acc
    return gx, gfilt


@njit(cache=True)
def lstm_gates_forward(gates, c_prev):
    b, h = c_prev.shape
    hn = np.empty((b, h), dtype=np.float64)
    cn = np.empty((b, h), dtype=np.float64)
    tc = np.empty((b, h), dtype=np.float64)
    ifgo = np.empty((b, 4 * h), dtype=np.float64)
    for bi in range(b):
        for hi in range(h):
            i = _sig(gates[bi, hi])
            f = _sig(gates[bi, h + hi])
            g = np.tanh(gates[bi, 2 * h + hi])
            o = _sig(gates[bi, 3 * h + hi])
            c = f * c_prev[bi, hi] + i * g
            t = np.tanh(c)
            cn[bi, hi] = c
            tc[bi, hi] = t
            hn[bi, hi] = o * t
            ifgo[bi, hi] = i
            ifgo[bi, h + hi] = f
            ifgo[bi, 2 * h + hi] = g
            ifgo[bi, 3 * h + hi] = o
    return hn, cn, ifgo, tc


@njit(cache=True)
def lstm_gates_backward(ifgo, c_prev, tc, gh, gc):
    b, h = c_prev.shape
    ggates = np.empty((b, 4 * h), dtype=np.float64)
    gc_prev = np.empty((b, h), dtype=np.float64)
    for bi in range(b):
        for hi in range(h):
            i = ifgo[bi, hi]
            f = ifgo[bi, h + hi]
            g = ifgo[bi, 2 * h + hi]
            o = ifgo[bi, 3 * h + hi]
            t = tc[bi, hi]
            gct = gc[bi, hi] + gh[bi, hi] * o * (1.0 - t * t)
            ggates[bi, hi] = gct * g * i * (1.0 - i)
            ggates[bi, h + hi] = gct * c_prev[bi, hi] * f * (1.0 - f)
            ggates[bi, 2 * h + hi] = gct * i * (1.0 - g * g)
            ggates[bi, 3 * h + hi] = gh[bi, hi] * t * o * (1.0 - o)
            gc_prev[bi, hi] = gct * f
    return ggates, gc_prev


@njit(cache=True)
def maxpool_time_forward(x):
    b, l, f = x.shape
    out = np.empty((b, f), dtype=np.float64)
    arg = np.empty((b, f), dtype=np.int64)
    for bi in range(b):
        for fi in range(f):
            best = x[bi, 0, fi]
            bestl = 0
            for li in range(1, l):
                v = x[bi, li, fi]
                if v > best:
                    best = v
                    bestl = li
            out[bi, fi] = best
            arg[bi, fi] = bestl
    return out, arg


@njit(cache=True)
def maxpool_time_backward(arg, gout, length):
    b, f = gout.shape
    gx = np.zeros((b, length, f), dtype=np.float64)
    for bi in range(b):
        for fi in range(f):
            gx[bi, arg[bi, fi], fi] += gout[bi, fi]
    return gx


@njit(cache=True)
def embedding_grad(ids, gout, vocab_size):
    n, d = gout.shape
    gtable = np.zeros((vocab_size, d), dtype=np.float64)
    for r in range(n):
        row = ids[r]
        for di in range(d):
            gtable[row, di] += gout[r, di]
    return gtable


@njit(cache=True)
def adam_update(param, grad, m, v, step, lr, beta1, beta2, eps):
    flat_p = param.ravel()
    flat_g = grad.ravel()
    flat_m = m.ravel()
    flat_v = v.ravel()
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for idx in range(flat_p.size):
        g = flat_g[idx]
        flat_m[idx] = beta1 * flat_m[idx] + (1.0 - beta1) * g
        flat_v[idx] = beta2 * flat_v[idx] + (1.0 - beta2) * g * g
        mhat = flat_m[idx] / c1
        vhat = flat_v[idx] / c2
        flat_p[idx] -= lr * mhat / (np.sqrt(vhat) + eps)


@njit(cache=True, inline="always")
def _sig(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)
