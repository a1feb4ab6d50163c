"""Conventional classifiers over TF-IDF features.

Five learners cover the classical side of the comparison: multinomial
Naive Bayes in closed form, logistic regression and a linear SVM by
mini-batch SGD, a Gini decision tree, and SAMME AdaBoost over decision
stumps.  All of them consume a dense documents-by-terms matrix and
integer labels; TfidfFeaturizer builds that matrix with document
frequencies fitted on the training slice only.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..corpus import PAD, CorpusRecord, Vocab
from ..errors import ConfigError
from ..seeding import rng_for

__all__ = [
    "MLHyper",
    "TfidfFeaturizer",
    "NBModel",
    "LinearModel",
    "TreeModel",
    "AdaBoostModel",
    "train_ml",
    "ML_KINDS",
]

ML_KINDS = ("nb", "lr", "svm", "tree", "adaboost")


@dataclass(frozen=True)
class MLHyper:
    """Shared hyperparameters for the conventional learners."""

    alpha: float = 1.0
    lr: float = 0.1
    l2: float = 1e-4
    epochs: int = 30
    batch_size: int = 32
    max_depth: int = 12
    n_stumps: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ConfigError("smoothing alpha must be positive")
        if self.lr <= 0 or self.l2 < 0:
            raise ConfigError("lr must be positive and l2 nonnegative")
        for name in ("epochs", "batch_size", "max_depth", "n_stumps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")


class TfidfFeaturizer:
    """tf(t,d) * log(N/df(t)) with document frequencies from fit time.

    Columns cover every token id the fitted records contained except
    PAD; transform maps any records onto those columns, dropping tokens
    the training slice never saw.
    """

    def __init__(self) -> None:
        self.terms: list[int] = []
        self.idf: np.ndarray | None = None
        self._col: dict[int, int] = {}

    def fit(self, records: list[CorpusRecord], vocab: Vocab | None = None):
        if not records:
            raise ConfigError("TfidfFeaturizer.fit needs records")
        df: Counter[int] = Counter()
        for rec in records:
            df.update(set(t for t in rec.tokens if t != PAD))
        n_docs = len(records)
        self.terms = sorted(df)
        self._col = {t: j for j, t in enumerate(self.terms)}
        self.idf = np.array([math.log(n_docs / df[t]) for t in self.terms])
        return self

    def transform(self, records: list[CorpusRecord]) -> np.ndarray:
        if self.idf is None:
            raise ConfigError("TfidfFeaturizer used before fit")
        out = np.zeros((len(records), len(self.terms)))
        for i, rec in enumerate(records):
            for t, tf in Counter(rec.tokens).items():
                j = self._col.get(t)
                if j is not None:
                    out[i, j] = tf * self.idf[j]
        return out

    def fit_transform(self, records: list[CorpusRecord]) -> np.ndarray:
        return self.fit(records).transform(records)


def _check_training_set(features: np.ndarray, labels: np.ndarray) -> int:
    if features.ndim != 2 or labels.ndim != 1:
        raise ConfigError("need a 2-d feature matrix and 1-d labels")
    if features.shape[0] != labels.shape[0]:
        raise ConfigError(
            f"{features.shape[0]} feature rows vs {labels.shape[0]} labels"
        )
    if features.shape[0] == 0:
        raise ConfigError("empty training set")
    k = int(labels.max()) + 1
    if len(np.unique(labels)) < 2:
        raise ConfigError("training set must contain at least 2 categories")
    return k


class NBModel:
    """Multinomial Naive Bayes with Laplace smoothing, log-space."""

    def __init__(self, log_priors: np.ndarray, log_lik: np.ndarray, alpha: float):
        self.log_priors = log_priors
        self.log_lik = log_lik
        self.alpha = alpha
        self.n_categories = log_priors.shape[0]

    @classmethod
    def fit(cls, features: np.ndarray, labels: np.ndarray, alpha: float) -> "NBModel":
        k = _check_training_set(features, labels)
        n, v = features.shape
        log_priors = np.zeros(k)
        log_lik = np.zeros((k, v))
        for c in range(k):
            rows = features[labels == c]
            log_priors[c] = (
                math.log(rows.shape[0] / n) if rows.shape[0] else -math.inf
            )
            counts = rows.sum(axis=0)
            log_lik[c] = np.log((counts + alpha) / (counts.sum() + alpha * v))
        return cls(log_priors, log_lik, alpha)

    def joint_log_likelihood(self, features: np.ndarray) -> np.ndarray:
        return self.log_priors + features @ self.log_lik.T

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        joint = self.joint_log_likelihood(features)
        joint -= joint.max(axis=1, keepdims=True)
        p = np.exp(joint)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.joint_log_likelihood(features).argmax(axis=1)


class LinearModel:
    """Softmax regression or one-vs-rest hinge SVM, trained by SGD."""

    def __init__(self, kind: str, weights: np.ndarray, bias: np.ndarray):
        self.kind = kind
        self.weights = weights
        self.bias = bias
        self.n_categories = bias.shape[0]

    @classmethod
    def fit(
        cls, kind: str, features: np.ndarray, labels: np.ndarray, hyper: MLHyper
    ) -> "LinearModel":
        k = _check_training_set(features, labels)
        n, v = features.shape
        w = np.zeros((v, k))
        b = np.zeros(k)
        for epoch in range(hyper.epochs):
            order = rng_for(hyper.seed, "ml", kind, epoch).permutation(n)
            for start in range(0, n, hyper.batch_size):
                idx = order[start : start + hyper.batch_size]
                xb, yb = features[idx], labels[idx]
                margins = xb @ w + b
                if kind == "lr":
                    z = margins - margins.max(axis=1, keepdims=True)
                    p = np.exp(z)
                    p /= p.sum(axis=1, keepdims=True)
                    p[np.arange(len(idx)), yb] -= 1.0
                    g = p / len(idx)
                else:
                    signs = np.full((len(idx), k), -1.0)
                    signs[np.arange(len(idx)), yb] = 1.0
                    violated = (1.0 - signs * margins) > 0
                    g = -(signs * violated) / len(idx)
                w -= hyper.lr * (xb.T @ g + hyper.l2 * w)
                b -= hyper.lr * g.sum(axis=0)
        return cls(kind, w, b)

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.decision_function(features).argmax(axis=1)


def _gini_best_split(features, labels, k):
    """Best (feature, threshold, weighted gini) over all midpoint cuts."""
    n = labels.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    best = None
    for f in range(features.shape[1]):
        col = features[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        cum = np.cumsum(onehot[order], axis=0)
        cuts = np.flatnonzero(xs[:-1] < xs[1:])
        if cuts.size == 0:
            continue
        left = cum[cuts]
        right = cum[-1] - left
        nl = (cuts + 1).astype(float)
        nr = n - nl
        gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gini_l + nr * gini_r) / n
        j = int(weighted.argmin())
        if best is None or weighted[j] < best[2] - 1e-12:
            thr = (xs[cuts[j]] + xs[cuts[j] + 1]) / 2.0
            best = (f, thr, float(weighted[j]))
    return best


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "label", "depth")

    def __init__(self, depth):
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.label = None
        self.depth = depth


class TreeModel:
    """CART-style decision tree: greedy Gini splits, capped depth."""

    def __init__(self, root: _Node, n_categories: int, max_depth: int):
        self.root = root
        self.n_categories = n_categories
        self.max_depth = max_depth

    @classmethod
    def fit(
        cls, features: np.ndarray, labels: np.ndarray, hyper: MLHyper
    ) -> "TreeModel":
        k = _check_training_set(features, labels)
        root = cls._grow(features, labels, k, 0, hyper.max_depth)
        return cls(root, k, hyper.max_depth)

    @staticmethod
    def _grow(features, labels, k, depth, max_depth):
        node = _Node(depth)
        counts = np.bincount(labels, minlength=k)
        node.label = int(counts.argmax())
        if depth >= max_depth or counts.max() == labels.shape[0]:
            return node
        # Split whenever any cut exists, even at zero Gini gain: parity-style
        # labelings only become separable one level down, and the purity and
        # depth stops already bound the recursion.
        split = _gini_best_split(features, labels, k)
        if split is None:
            return node
        f, thr, _ = split
        go_left = features[:, f] <= thr
        node.feature = f
        node.threshold = thr
        node.left = TreeModel._grow(
            features[go_left], labels[go_left], k, depth + 1, max_depth
        )
        node.right = TreeModel._grow(
            features[~go_left], labels[~go_left], k, depth + 1, max_depth
        )
        return node

    def depth(self) -> int:
        def walk(node):
            if node.feature is None:
                return node.depth
            return max(walk(node.left), walk(node.right))

        return walk(self.root)

    def predict(self, features: np.ndarray) -> np.ndarray:
        out = np.empty(features.shape[0], dtype=np.int64)
        for i, row in enumerate(features):
            node = self.root
            while node.feature is not None:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.label
        return out


@dataclass
class _Stump:
    feature: int
    threshold: float
    left_label: int
    right_label: int

    def predict(self, features: np.ndarray) -> np.ndarray:
        go_left = features[:, self.feature] <= self.threshold
        return np.where(go_left, self.left_label, self.right_label)


def _best_weighted_stump(features, labels, weights, k):
    """Stump minimizing weighted misclassification; None if no cut exists."""
    n = labels.shape[0]
    wh = np.zeros((n, k))
    wh[np.arange(n), labels] = weights
    best = None
    for f in range(features.shape[1]):
        col = features[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        cum = np.cumsum(wh[order], axis=0)
        cuts = np.flatnonzero(xs[:-1] < xs[1:])
        if cuts.size == 0:
            continue
        left = cum[cuts]
        right = cum[-1] - left
        correct = left.max(axis=1) + right.max(axis=1)
        j = int(correct.argmax())
        err = float(weights.sum() - correct[j])
        if best is None or err < best[0] - 1e-12:
            thr = (xs[cuts[j]] + xs[cuts[j] + 1]) / 2.0
            best = (
                err,
                _Stump(
                    feature=f,
                    threshold=thr,
                    left_label=int(left[j].argmax()),
                    right_label=int(right[j].argmax()),
                ),
            )
    return best


class AdaBoostModel:
    """SAMME boosting over decision stumps."""

    def __init__(self, stumps: list[_Stump], alphas: list[float], n_categories: int):
        self.stumps = stumps
        self.alphas = alphas
        self.n_categories = n_categories

    @classmethod
    def fit(
        cls, features: np.ndarray, labels: np.ndarray, hyper: MLHyper
    ) -> "AdaBoostModel":
        k = _check_training_set(features, labels)
        n = features.shape[0]
        weights = np.full(n, 1.0 / n)
        stumps: list[_Stump] = []
        alphas: list[float] = []
        for _ in range(hyper.n_stumps):
            found = _best_weighted_stump(features, labels, weights, k)
            if found is None:
                break
            err, stump = found
            err = max(err, 1e-12)
            if err >= 1.0 - 1.0 / k:
                break
            alpha = math.log((1.0 - err) / err) + math.log(k - 1.0)
            stumps.append(stump)
            alphas.append(alpha)
            miss = stump.predict(features) != labels
            if not miss.any():
                break
            weights = weights * np.exp(alpha * miss)
            weights /= weights.sum()
        if not stumps:
            raise ConfigError("AdaBoost found no usable stump")
        return cls(stumps, alphas, k)

    def staged_predictions(self, features: np.ndarray):
        """Predictions after each boosting round, for training curves."""
        scores = np.zeros((features.shape[0], self.n_categories))
        for stump, alpha in zip(self.stumps, self.alphas):
            preds = stump.predict(features)
            scores[np.arange(features.shape[0]), preds] += alpha
            yield scores.argmax(axis=1)

    def predict(self, features: np.ndarray) -> np.ndarray:
        last = None
        for last in self.staged_predictions(features):
            pass
        return last


def train_ml(
    kind: str,
    features: np.ndarray,
    labels,
    hyper: MLHyper = MLHyper(),
):
    """Train one conventional classifier on a feature matrix."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if kind == "nb":
        return NBModel.fit(features, labels, hyper.alpha)
    if kind in ("lr", "svm"):
        return LinearModel.fit(kind, features, labels, hyper)
    if kind == "tree":
        return TreeModel.fit(features, labels, hyper)
    if kind == "adaboost":
        return AdaBoostModel.fit(features, labels, hyper)
    raise ConfigError(f"unknown classifier kind {kind!r}")
