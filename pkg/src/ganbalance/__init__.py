"""Rebalance skewed sentiment corpora with category-aware text GANs.

The package covers the whole loop: clean raw review datasets, train
category-conditioned sequence GANs on the skewed training split, synthesize
minority-class text until the classes match, then measure what that does to a
bank of sentiment classifiers. Everything runs on a small float64 tensor
core with reverse-mode autodiff; no deep learning framework is involved.
"""

from .errors import (
    CheckpointError,
    ConfigError,
    CorpusError,
    GanBalanceError,
    HygieneError,
    ShapeError,
    TrainingDiverged,
)

__version__ = "0.1.0"

__all__ = [
    "GanBalanceError",
    "ShapeError",
    "CheckpointError",
    "CorpusError",
    "TrainingDiverged",
    "HygieneError",
    "ConfigError",
    "__version__",
]
