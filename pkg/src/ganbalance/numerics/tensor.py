"""Dense float64 tensors and the dynamic reverse-mode tape.

A Tensor is a thin box around a numpy array. Operators in
:mod:`ganbalance.numerics.ops` record onto the innermost active
:class:`Tape` whenever any input requires gradients; with no tape active
they are plain numpy math, which is what the sampling fast paths rely on.
The tape is rebuilt every forward pass, so entries are in topological order
by construction and ``backward`` is a single reverse sweep.
"""

import numpy as np

from ..errors import ShapeError

_TAPE_STACK = []


class Tensor:
    """A float64 array plus gradient bookkeeping.

    Attributes:
        data: the numpy array, always float64.
        requires_grad: whether backward should produce a gradient for it.
        grad: accumulated gradient array, or None before any backward.
        name: optional label, used in optimizer and checkpoint errors.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self):
        """A non-recording view of the same data."""
        return Tensor(self.data, requires_grad=False, name=self.name)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # Arithmetic sugar; the real work lives in ops.py.

    def __add__(self, other):
        from . import ops

        return ops.add(self, _wrap(other))

    def __radd__(self, other):
        from . import ops

        return ops.add(_wrap(other), self)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, _wrap(other))

    def __rsub__(self, other):
        from . import ops

        return ops.sub(_wrap(other), self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, _wrap(other))

    def __rmul__(self, other):
        from . import ops

        return ops.mul(_wrap(other), self)

    def __neg__(self):
        from . import ops

        return ops.mul(self, _wrap(-1.0))

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, _wrap(other))


def _wrap(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class TapeEntry:
    """One recorded operation: inputs, outputs and its backward rule."""

    __slots__ = ("op", "inputs", "outputs", "backward")

    def __init__(self, op, inputs, outputs, backward):
        self.op = op
        self.inputs = inputs
        self.outputs = outputs
        self.backward = backward


class Tape:
    """Ordered record of operations for one forward pass.

    Use as a context manager around the forward computation, then call
    :meth:`backward` on the scalar loss. Entries hold strong references to
    every tensor they touch, so object identity is stable for the sweep.
    """

    def __init__(self):
        self.entries = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def record(self, op, inputs, outputs, backward):
        for out in outputs:
            out._tape = self
        self.entries.append(TapeEntry(op, inputs, outputs, backward))

    def backward(self, loss):
        """Reverse sweep from a scalar loss.

        Populates ``.grad`` (accumulating, never overwriting) on every
        requires_grad leaf recorded on this tape. Leaves the loss does not
        reach get a zero gradient so optimizers see a full set.
        """
        if not isinstance(loss, Tensor):
            raise TypeError("backward expects a Tensor loss")
        if loss.data.size != 1:
            raise ShapeError(
                f"backward needs a scalar loss, got shape {loss.data.shape}"
            )
        grads = {id(loss): np.ones_like(loss.data)}
        produced = set()
        for entry in self.entries:
            for out in entry.outputs:
                produced.add(id(out))
        for entry in reversed(self.entries):
            gouts = [grads.get(id(out)) for out in entry.outputs]
            if all(g is None for g in gouts):
                continue
            gouts = [
                np.zeros_like(out.data) if g is None else g
                for g, out in zip(gouts, entry.outputs)
            ]
            gins = entry.backward(*gouts)
            for tin, gin in zip(entry.inputs, gins):
                if gin is None or not tin.requires_grad:
                    continue
                acc = grads.get(id(tin))
                grads[id(tin)] = gin if acc is None else acc + gin
        seen = set()
        for entry in self.entries:
            for tin in entry.inputs:
                key = id(tin)
                if key in seen or key in produced or not tin.requires_grad:
                    continue
                seen.add(key)
                g = grads.get(key)
                if g is None:
                    g = np.zeros_like(tin.data)
                else:
                    g = np.asarray(g, dtype=np.float64).reshape(tin.data.shape)
                tin.grad = g if tin.grad is None else tin.grad + g


def active_tape():
    """The innermost open Tape, or None when nothing records."""
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(loss):
    """Run the reverse sweep on the tape that recorded ``loss``."""
    if not isinstance(loss, Tensor) or loss._tape is None:
        raise ValueError(
            "loss was not recorded on a tape; wrap the forward pass in "
            "`with Tape() as tape:` and make sure some input requires grad"
        )
    loss._tape.backward(loss)
