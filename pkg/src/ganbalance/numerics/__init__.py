"""Minimal float64 tensor core with reverse-mode autodiff."""

from . import kernels, ops
from .checkpoint import load_arrays, save_arrays
from .optim import Adam, SGDMomentum, clip_global_norm
from .tensor import Tape, Tensor, active_tape, backward

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "active_tape",
    "ops",
    "kernels",
    "Adam",
    "SGDMomentum",
    "clip_global_norm",
    "save_arrays",
    "load_arrays",
]
