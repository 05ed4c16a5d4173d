"""Linear multiclass classification and evaluation metrics.

The classifier is a one-vs-rest hinge-loss linear model trained by
seeded stochastic subgradient descent (Pegasos-style step sizes) with
averaged iterates, which keeps training fully deterministic and
self-contained.  Evaluation helpers cover majority voting over
per-snippet labels, frame accuracy, confusion matrices, selectivity
ratios of per-class feature blocks, and Fisher scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSelectivity,
    EmptyInput,
    EmptyTrainingSet,
    InvalidDimension,
    InvalidInput,
    SingleClass,
)

DEFAULT_REG = 1.0
DEFAULT_EPOCHS = 50
_FISHER_EPS = 1e-12


@dataclass(frozen=True)
class LinearClassifier:
    """One-vs-rest linear scorer: one weight row and bias per class."""

    weights: np.ndarray      # (C, D)
    biases: np.ndarray       # (C,)
    class_labels: tuple

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[0] < 2:
            raise InvalidDimension("need a (C, D) weight matrix with C >= 2")
        if self.biases.shape != (self.weights.shape[0],):
            raise InvalidDimension("one bias per class required")
        if len(self.class_labels) != self.weights.shape[0]:
            raise InvalidDimension("one label per class required")
        if not (np.isfinite(self.weights).all()
                and np.isfinite(self.biases).all()):
            raise InvalidInput("classifier parameters must be finite")

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]


def _check_training_data(features, labels):
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise InvalidDimension("features must be a 2-D sample matrix")
    if y.shape != (x.shape[0],):
        raise InvalidDimension(
            f"{x.shape[0]} samples but {y.shape} labels")
    if x.shape[0] == 0:
        raise EmptyTrainingSet("no training samples")
    if not np.isfinite(x).all():
        raise InvalidInput("features must be finite")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClass("training data must contain at least 2 classes")
    return x, y, classes


def train_linear(features, labels, reg=DEFAULT_REG, epochs=DEFAULT_EPOCHS,
                 seed=0):
    """Fit a one-vs-rest hinge-loss classifier by averaged SGD.

    Each sample visit makes one Pegasos step with learning rate
    1/(reg * t) for every class simultaneously; the returned model is
    the average of all iterates, which smooths out the SGD noise.
    Bit-deterministic given seed.
    """
    x, y, classes = _check_training_data(features, labels)
    if reg <= 0:
        raise InvalidInput("reg must be positive")
    if epochs < 1:
        raise InvalidInput("epochs must be >= 1")
    n, dim = x.shape
    c = classes.size
    signs = np.where(y[:, None] == classes[None, :], 1.0, -1.0)  # (n, C)

    rng = np.random.default_rng(seed)
    w = np.zeros((c, dim))
    b = np.zeros(c)
    w_sum = np.zeros_like(w)
    b_sum = np.zeros_like(b)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg * t)
            xi = x[i]
            viol = signs[i] * (w @ xi + b) < 1.0
            w *= 1.0 - eta * reg
            if viol.any():
                w[viol] += (eta * signs[i, viol])[:, None] * xi
                b[viol] += eta * signs[i, viol]
            w_sum += w
            b_sum += b
    return LinearClassifier(w_sum / t, b_sum / t, tuple(classes.tolist()))


def hinge_objective(clf: LinearClassifier, features, labels,
                    reg=DEFAULT_REG):
    """One-vs-rest objective: sum over classes of reg/2 ||w||^2 + mean hinge."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    signs = np.where(
        y[:, None] == np.asarray(clf.class_labels)[None, :], 1.0, -1.0)
    margins = signs * (x @ clf.weights.T + clf.biases)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    return float((0.5 * reg * (clf.weights ** 2).sum(axis=1) + hinge).sum())


def scores(clf: LinearClassifier, feature) -> np.ndarray:
    """Per-class decision values for one feature vector."""
    x = np.asarray(feature, dtype=float)
    if x.shape != (clf.dim,):
        raise InvalidDimension(
            f"classifier expects dim {clf.dim}, got {x.shape}")
    # per-row dots, not gemv: keeps single-feature scoring bit-equal to
    # the plain dot-product definition
    return np.array([np.dot(w, x) for w in clf.weights]) + clf.biases


def predict(clf: LinearClassifier, feature):
    """Label of the highest-scoring class; ties go to the lowest index."""
    return clf.class_labels[int(np.argmax(scores(clf, feature)))]


def predict_many(clf: LinearClassifier, features):
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != clf.dim:
        raise InvalidDimension(
            f"classifier expects (n, {clf.dim}), got {x.shape}")
    idx = np.argmax(x @ clf.weights.T + clf.biases, axis=1)
    labels = np.asarray(clf.class_labels)
    return labels[idx]


def majority_vote(frame_labels):
    """Most frequent label; ties go to the lowest label."""
    arr = np.asarray(frame_labels)
    if arr.size == 0:
        raise EmptyInput("majority_vote needs at least one label")
    values, counts = np.unique(arr, return_counts=True)
    return values[int(np.argmax(counts))].item()


def frame_accuracy(predicted, truth):
    """Fraction of positions where the labels agree."""
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.shape != t.shape or p.ndim != 1:
        raise InvalidInput(f"label sequences differ: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise InvalidInput("cannot score empty label sequences")
    return float((p == t).mean())


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are predicted classes, columns are true classes."""

    counts: np.ndarray       # (C, C) ints
    class_labels: tuple

    def __post_init__(self):
        c = len(self.class_labels)
        if self.counts.shape != (c, c):
            raise InvalidDimension("counts must be square over the labels")
        if (self.counts < 0).any():
            raise InvalidInput("counts must be nonnegative")

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        if self.total == 0:
            return 0.0
        return float(np.trace(self.counts)) / self.total

    def render(self) -> str:
        labels = [str(l) for l in self.class_labels]
        width = max(6, max(len(l) for l in labels) + 1)
        head = "pred\\true".ljust(width) + "".join(
            l.rjust(width) for l in labels)
        lines = [head]
        for i, l in enumerate(labels):
            row = l.ljust(width) + "".join(
                str(int(v)).rjust(width) for v in self.counts[i])
            lines.append(row)
        return "\n".join(lines)


def confusion_matrix(predicted, truth, class_labels=None) -> ConfusionMatrix:
    """Tally predicted-vs-true label pairs.

    Column sums equal the per-class instance counts, so trace/total is
    the plain accuracy.
    """
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.shape != t.shape or p.ndim != 1:
        raise InvalidInput(f"label sequences differ: {p.shape} vs {t.shape}")
    if class_labels is None:
        class_labels = np.unique(np.concatenate([p, t])).tolist()
    labels = list(class_labels)
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for pi, ti in zip(p.tolist(), t.tolist()):
        if pi not in index or ti not in index:
            raise InvalidInput(f"label pair ({pi}, {ti}) outside class set")
        counts[index[pi], index[ti]] += 1
    return ConfusionMatrix(counts, tuple(labels))


def selectivity_table(block_sums):
    """Interclass-to-intraclass feature ratios and their summary.

    ``block_sums[i, j]`` is the summed feature mass of class-i cuboids
    under the class-j functions.  Each row is divided by its diagonal
    entry, so ratios[i, j] says how much louder class-j functions are
    on foreign data; larger is more selective.  The average selectivity
    is the mean over rows of the smallest off-diagonal ratio (the worst
    confusable class pair).
    """
    s = np.asarray(block_sums, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise InvalidDimension("block_sums must be square")
    c = s.shape[0]
    if c < 2:
        raise SingleClass("selectivity needs at least 2 classes")
    diag = np.diag(s)
    if (diag <= 0).any() or not np.isfinite(s).all():
        raise DegenerateSelectivity("intraclass sums must be positive")
    ratios = s / diag[:, None]
    off = ratios + np.where(np.eye(c, dtype=bool), np.inf, 0.0)
    average = float(off.min(axis=1).mean())
    return ratios, average


def fisher_score(features, labels):
    """Between-class over within-class variance, per feature dimension.

    Between is the variance of the class means (ddof=1); within is the
    mean per-class population variance.  For two classes this reduces
    to (mu1 - mu2)^2 / (sigma1^2 + sigma2^2).  Returns (scores, mean).
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise InvalidDimension("features must be (n, D) with one label each")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClass("fisher_score needs at least 2 classes")
    means = np.stack([x[y == c].mean(axis=0) for c in classes])
    within = np.stack([x[y == c].var(axis=0) for c in classes]).mean(axis=0)
    between = means.var(axis=0, ddof=1)
    per_dim = between / (within + _FISHER_EPS)
    return per_dim, float(per_dim.mean())
