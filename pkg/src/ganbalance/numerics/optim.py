"""Optimizers over named parameter sets.

Both optimizers clip gradients by global norm (default 5.0) before every
update and zero the gradients afterwards. Parameters are a name -> Tensor
mapping; names key the per-parameter state so checkpoints can restore it.
"""

import numpy as np

from ..errors import GanBalanceError
from . import kernels


def clip_global_norm(params, max_norm):
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip global norm. Non-finite norms are returned as-is
    so callers can run divergence guards before stepping.
    """
    total = 0.0
    grads = []
    for name, p in params.items():
        if p.grad is None:
            raise GanBalanceError(f"missing grad on parameter {name!r}")
        grads.append(p.grad)
        total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if np.isfinite(norm) and norm > max_norm > 0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class Adam:
    """Adam with bias correction, matching the standard update exactly."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip_norm=5.0):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        """Clip, update every parameter in place, zero grads."""
        if self.clip_norm:
            clip_global_norm(self.params, self.clip_norm)
        self.step_count += 1
        for name, p in self.params.items():
            if p.grad is None:
                raise GanBalanceError(f"missing grad on parameter {name!r}")
            kernels.adam_update(
                p.data, p.grad, self.m[name], self.v[name],
                self.step_count, self.lr, self.beta1, self.beta2, self.eps,
            )
        self.zero_grad()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_arrays(self, prefix=""):
        """Flat name -> array map of all optimizer state, for checkpoints."""
        out = {f"{prefix}step": np.asarray(float(self.step_count))}
        for name in self.params:
            out[f"{prefix}m/{name}"] = self.m[name]
            out[f"{prefix}v/{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays, prefix=""):
        self.step_count = int(arrays[f"{prefix}step"])
        for name in self.params:
            self.m[name] = np.array(arrays[f"{prefix}m/{name}"])
            self.v[name] = np.array(arrays[f"{prefix}v/{name}"])

    def clone_state(self):
        return {
            "step": self.step_count,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def restore_state(self, snap):
        self.step_count = snap["step"]
        self.m = {k: v.copy() for k, v in snap["m"].items()}
        self.v = {k: v.copy() for k, v in snap["v"].items()}


class SGDMomentum:
    """Plain SGD with a momentum buffer."""

    def __init__(self, params, lr=1e-2, momentum=0.9, clip_norm=5.0):
        self.params = dict(params)
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.vel = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        if self.clip_norm:
            clip_global_norm(self.params, self.clip_norm)
        for name, p in self.params.items():
            if p.grad is None:
                raise GanBalanceError(f"missing grad on parameter {name!r}")
            v = self.vel[name]
            v *= self.momentum
            v += p.grad
            p.data -= self.lr * v
        self.zero_grad()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
