"""Backend selection for the hot kernels.

The numba backend is the default. Set ``GANBALANCE_NUMBA=0`` (or numba's own
``NUMBA_DISABLE_JIT=1``) to force the pure-numpy path; if numba is not
importable the fallback is automatic. ``BACKEND`` reports which one is live.
"""

import logging
import os

from . import _kernels_numpy

logger = logging.getLogger(__name__)


def _want_numba():
    if os.environ.get("GANBALANCE_NUMBA", "1").lower() in ("0", "false", "off"):
        return False
    if os.environ.get("NUMBA_DISABLE_JIT", "0") not in ("", "0"):
        return False
    return True


_impl = _kernels_numpy
BACKEND = "numpy"
if _want_numba():
    try:
        from . import _kernels_numba as _impl  # noqa: F811

        BACKEND = "numba"
    except ImportError:
        logger.warning("numba unavailable, falling back to numpy kernels")

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
lstm_gates_forward = _impl.lstm_gates_forward
lstm_gates_backward = _impl.lstm_gates_backward
maxpool_time_forward = _impl.maxpool_time_forward
maxpool_time_backward = _impl.maxpool_time_backward
embedding_grad = _impl.embedding_grad
adam_update = _impl.adam_update


def warmup():
    """Trigger JIT compilation on tiny inputs so timed code paths stay honest."""
    import numpy as np

    x = np.zeros((1, 4, 2))
    f = np.zeros((2, 2, 3))
    out = conv1d_forward(x, f)
    conv1d_backward(x, f, out)
    g = np.zeros((1, 8))
    c = np.zeros((1, 2))
    h, cn, ifgo, tc = lstm_gates_forward(g, c)
    lstm_gates_backward(ifgo, c, tc, h, cn)
    pooled, arg = maxpool_time_forward(x)
    maxpool_time_backward(arg, pooled, 4)
    embedding_grad(np.zeros(3, dtype=np.int64), np.zeros((3, 2)), 5)
    p = np.zeros(4)
    adam_update(p, p.copy(), p.copy(), p.copy(), 1, 1e-3, 0.9, 0.999, 1e-8)
