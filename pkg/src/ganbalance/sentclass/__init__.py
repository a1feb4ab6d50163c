"""Sentiment classifier bank: conventional and neural models + metrics."""

from .metrics import ClsMetrics, evaluate, metrics_from_predictions
from .ml import (
    ML_KINDS,
    AdaBoostModel,
    LinearModel,
    MLHyper,
    NBModel,
    TfidfFeaturizer,
    TreeModel,
    train_ml,
)
from .nn import NN_ARCHS, NNHyper, NNModel, train_nn

__all__ = [
    "ClsMetrics",
    "evaluate",
    "metrics_from_predictions",
    "ML_KINDS",
    "MLHyper",
    "TfidfFeaturizer",
    "NBModel",
    "LinearModel",
    "TreeModel",
    "AdaBoostModel",
    "train_ml",
    "NN_ARCHS",
    "NNHyper",
    "NNModel",
    "train_nn",
]
