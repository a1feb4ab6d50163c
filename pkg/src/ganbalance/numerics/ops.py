"""Differentiable operators.

Each function validates shapes, computes the forward value with numpy or a
hot kernel, and registers a backward rule on the active tape when any input
requires gradients. Backward rules take the output gradients and return one
gradient per input (None for inputs that cannot take one).
"""

import numpy as np

from ..errors import ShapeError
from . import kernels
from .tensor import Tensor, _wrap, active_tape


def _make(op, inputs, out_datas, backward):
    req = any(t.requires_grad for t in inputs)
    outs = [Tensor(d, requires_grad=req) for d in out_datas]
    tape = active_tape()
    if tape is not None and req:
        tape.record(op, list(inputs), outs, backward)
    return outs


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast"
        ) from None


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("add", a, b)

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make("add", (a, b), [a.data + b.data], back)[0]


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("sub", a, b)

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make("sub", (a, b), [a.data - b.data], back)[0]


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("mul", a, b)
    ad, bd = a.data, b.data

    def back(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _make("mul", (a, b), [ad * bd], back)[0]


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"matmul: expects 2-d operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: inner dims differ, {a.data.shape} @ {b.data.shape}"
        )
    ad, bd = a.data, b.data

    def back(g):
        return g @ bd.T, ad.T @ g

    return _make("matmul", (a, b), [ad @ bd], back)[0]


def tanh(a):
    a = _wrap(a)
    y = np.tanh(a.data)

    def back(g):
        return (g * (1.0 - y * y),)

    return _make("tanh", (a,), [y], back)[0]


def sigmoid(a):
    a = _wrap(a)
    y = np_sigmoid(a.data)

    def back(g):
        return (g * y * (1.0 - y),)

    return _make("sigmoid", (a,), [y], back)[0]


def relu(a):
    a = _wrap(a)
    mask = a.data > 0

    def back(g):
        return (g * mask,)

    return _make("relu", (a,), [np.where(mask, a.data, 0.0)], back)[0]


def log(a):
    a = _wrap(a)
    ad = a.data

    def back(g):
        return (g / ad,)

    return _make("log", (a,), [np.log(ad)], back)[0]


def exp(a):
    a = _wrap(a)
    y = np.exp(a.data)

    def back(g):
        return (g * y,)

    return _make("exp", (a,), [y], back)[0]


def softplus(a):
    """log(1 + exp(x)), computed without overflow."""
    a = _wrap(a)
    ad = a.data

    def back(g):
        return (g * np_sigmoid(ad),)

    return _make("softplus", (a,), [np.logaddexp(0.0, ad)], back)[0]


def softmax(a, axis=-1):
    a = _wrap(a)
    y = np_softmax(a.data, axis=axis)

    def back(g):
        inner = np.sum(g * y, axis=axis, keepdims=True)
        return (y * (g - inner),)

    return _make("softmax", (a,), [y], back)[0]


def mean(a):
    """Mean over all elements, as a scalar tensor."""
    a = _wrap(a)
    n = a.data.size
    shape = a.data.shape

    def back(g):
        return (np.full(shape, float(g) / n),)

    return _make("mean", (a,), [np.asarray(a.data.mean())], back)[0]


def tsum(a, axis=None, keepdims=False):
    """Sum, optionally along an axis. Named tsum to keep builtins clear."""
    a = _wrap(a)
    shape = a.data.shape

    def back(g):
        if axis is None:
            return (np.full(shape, float(g)),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2, shape).copy(),)

    return _make("sum", (a,), [a.data.sum(axis=axis, keepdims=keepdims)], back)[0]


def reshape(a, shape):
    """View with a new shape; sizes must agree."""
    a = _wrap(a)
    old = a.data.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {old} as {shape}") from None

    def back(g):
        return (np.asarray(g).reshape(old),)

    return _make("reshape", (a,), [out], back)[0]


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: empty input list")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(tensors))
        )

    out = np.concatenate([t.data for t in tensors], axis=axis)
    return _make("concat", tuple(tensors), [out], back)[0]


def embedding_lookup(table, ids):
    """Gather rows of a (V, D) table by integer id.

    Args:
        table: (V, D) parameter tensor.
        ids: integer ndarray of any shape; output shape is ids.shape + (D,).
    """
    table = _wrap(table)
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding_lookup: ids must be integers")
    if table.data.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-d, got {table.data.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError(
            f"embedding_lookup: id out of range for table with "
            f"{table.data.shape[0]} rows"
        )
    vocab = table.data.shape[0]
    dim = table.data.shape[1]
    flat_ids = ids.reshape(-1).astype(np.int64)

    def back(g):
        return (kernels.embedding_grad(flat_ids, g.reshape(-1, dim), vocab),)

    return _make("embedding_lookup", (table,), [table.data[ids]], back)[0]


def conv1d(x, filters):
    """Valid convolution over time. x: (B, L, D), filters: (W, D, F)."""
    x, filters = _wrap(x), _wrap(filters)
    if x.data.ndim != 3 or filters.data.ndim != 3:
        raise ShapeError(
            f"conv1d: need (B, L, D) and (W, D, F), got {x.data.shape} and "
            f"{filters.data.shape}"
        )
    if x.data.shape[2] != filters.data.shape[1]:
        raise ShapeError(
            f"conv1d: channel dims differ, {x.data.shape} vs {filters.data.shape}"
        )
    if x.data.shape[1] < filters.data.shape[0]:
        raise ShapeError(
            f"conv1d: sequence length {x.data.shape[1]} shorter than filter "
            f"width {filters.data.shape[0]}"
        )
    xd, fd = x.data, filters.data

    def back(g):
        return kernels.conv1d_backward(xd, fd, g)

    return _make("conv1d", (x, filters), [kernels.conv1d_forward(xd, fd)], back)[0]


def max_pool_over_time(x):
    """Max over axis 1. x: (B, L, F) -> (B, F)."""
    x = _wrap(x)
    if x.data.ndim != 3:
        raise ShapeError(f"max_pool_over_time: need (B, L, F), got {x.data.shape}")
    length = x.data.shape[1]
    out, arg = kernels.maxpool_time_forward(x.data)

    def back(g):
        return (kernels.maxpool_time_backward(arg, g, length),)

    return _make("max_pool_over_time", (x,), [out], back)[0]


def lstm_gates(gates, c_prev):
    """Elementwise LSTM cell update from pre-activations.

    Args:
        gates: (B, 4H) pre-activations laid out [i, f, g, o].
        c_prev: (B, H) previous cell state.

    Returns:
        (h, c) tensors, both (B, H).
    """
    gates, c_prev = _wrap(gates), _wrap(c_prev)
    if gates.data.ndim != 2 or c_prev.data.ndim != 2:
        raise ShapeError("lstm_gates: need 2-d gates and cell state")
    if gates.data.shape != (c_prev.data.shape[0], 4 * c_prev.data.shape[1]):
        raise ShapeError(
            f"lstm_gates: gates {gates.data.shape} do not match cell "
            f"{c_prev.data.shape}"
        )
    cd = c_prev.data
    h, c, ifgo, tc = kernels.lstm_gates_forward(gates.data, cd)

    def back(gh, gc):
        return kernels.lstm_gates_backward(ifgo, cd, tc, gh, gc)

    return tuple(_make("lstm_gates", (gates, c_prev), [h, c], back))


def pick(a, idx):
    """Gather one element per row: out[b] = a[b, idx[b]]."""
    a = _wrap(a)
    idx = np.asarray(idx)
    if a.data.ndim != 2 or idx.ndim != 1 or idx.shape[0] != a.data.shape[0]:
        raise ShapeError(
            f"pick: need (B, V) and (B,) indices, got {a.data.shape} and {idx.shape}"
        )
    rows = np.arange(a.data.shape[0])
    shape = a.data.shape

    def back(g):
        ga = np.zeros(shape)
        ga[rows, idx] = g
        return (ga,)

    return _make("pick", (a,), [a.data[rows, idx]], back)[0]


def cross_entropy(logits, targets, reduce="mean"):
    """Softmax cross-entropy against integer targets.

    Args:
        logits: (B, V) tensor.
        targets: (B,) integer ndarray.
        reduce: "mean" for a scalar, "none" for per-row losses.
    """
    logits = _wrap(logits)
    targets = np.asarray(targets)
    if logits.data.ndim != 2 or targets.ndim != 1:
        raise ShapeError(
            f"cross_entropy: need (B, V) logits and (B,) targets, got "
            f"{logits.data.shape} and {targets.shape}"
        )
    if targets.shape[0] != logits.data.shape[0]:
        raise ShapeError("cross_entropy: batch sizes differ")
    if reduce not in ("mean", "none"):
        raise ValueError(f"cross_entropy: unknown reduce {reduce!r}")
    b = logits.data.shape[0]
    rows = np.arange(b)
    probs = np_softmax(logits.data, axis=-1)
    m = logits.data.max(axis=-1)
    lse = m + np.log(np.exp(logits.data - m[:, None]).sum(axis=-1))
    losses = lse - logits.data[rows, targets]

    def back(g):
        delta = probs.copy()
        delta[rows, targets] -= 1.0
        if reduce == "mean":
            return (delta * (float(g) / b),)
        return (delta * g[:, None],)

    out = np.asarray(losses.mean()) if reduce == "mean" else losses
    return _make("cross_entropy", (logits,), [out], back)[0]


def gumbel_softmax(logits, temperature, hard=False, rng=None):
    """Gumbel-softmax relaxation, optionally with straight-through outputs.

    Noise is g = -log(-log(u)) with u uniform and clamped to
    [1e-10, 1 - 1e-10]. With hard=True the forward value is the one-hot
    argmax of the soft sample while gradients still follow the soft path.

    Args:
        logits: (V,) or (B, V) tensor.
        temperature: positive float.
        hard: straight-through one-hot output when True.
        rng: numpy Generator or integer seed; required for determinism.
    """
    logits = _wrap(logits)
    if temperature <= 0:
        raise ValueError(f"gumbel_softmax: temperature must be positive, got {temperature}")
    if logits.data.ndim not in (1, 2):
        raise ShapeError(f"gumbel_softmax: need (V,) or (B, V), got {logits.data.shape}")
    if rng is None:
        raise ValueError("gumbel_softmax: pass an rng or integer seed")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(int(rng))
    u = rng.random(logits.data.shape)
    np.clip(u, 1e-10, 1.0 - 1e-10, out=u)
    noise = -np.log(-np.log(u))
    y_soft = np_softmax((logits.data + noise) / temperature, axis=-1)
    if hard:
        arg = np.argmax(y_soft, axis=-1)
        out = np.zeros_like(y_soft)
        if y_soft.ndim == 1:
            out[arg] = 1.0
        else:
            out[np.arange(y_soft.shape[0]), arg] = 1.0
    else:
        out = y_soft

    def back(g):
        inner = np.sum(g * y_soft, axis=-1, keepdims=True)
        return (y_soft * (g - inner) / temperature,)

    return _make("gumbel_softmax", (logits,), [out], back)[0]


OP_REGISTRY = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "softmax": softmax,
    "log": log,
    "exp": exp,
    "softplus": softplus,
    "embedding_lookup": embedding_lookup,
    "reshape": reshape,
    "concat": concat,
    "conv1d": conv1d,
    "max_pool_over_time": max_pool_over_time,
    "mean": mean,
    "sum": tsum,
    "lstm_gates": lstm_gates,
    "pick": pick,
    "cross_entropy": cross_entropy,
    "gumbel_softmax": gumbel_softmax,
}


def forward_op(kind, *inputs, **kwargs):
    """Dispatch by operator name. Unknown kinds raise ValueError."""
    try:
        fn = OP_REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown operator kind {kind!r}") from None
    return fn(*inputs, **kwargs)


def np_sigmoid(x):
    """Numerically safe sigmoid on a raw array."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def np_softmax(x, axis=-1):
    """Numerically safe softmax on a raw array."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)
