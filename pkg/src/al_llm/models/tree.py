"""CART decision tree with Gini impurity.

Splits minimize the weighted children impurity over midpoint thresholds of
every feature; ties break toward the lowest feature index, then the lowest
threshold, so training is fully deterministic.  Depth is unbounded by
default and leaves may hold a single sample, which lets the tree memorize
any consistent training set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import TrainedClassifier, check_training_inputs

__all__ = ["TreeConfig", "DecisionTreeModel", "fit_tree"]


@dataclass(frozen=True)
class TreeConfig:
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "proba")

    def __init__(self) -> None:
        self.feature: int = -1
        self.threshold: float = 0.0
        self.left: Optional[_Node] = None
        self.right: Optional[_Node] = None
        self.proba: Optional[np.ndarray] = None  # set on leaves


def _best_split(
    X: np.ndarray, y: np.ndarray, class_count: int, min_leaf: int
) -> Optional[tuple[int, float]]:
    """Return (feature, threshold) maximizing the Gini split score, or None.

    The score maximized is sum_c nl_c^2/nl + sum_c nr_c^2/nr, an equivalent
    reformulation of minimizing weighted children Gini that stays in exact
    integer-derived arithmetic.  Strict improvement comparison implements
    the lowest-feature / lowest-threshold tie-breaking.
    """
    n = len(y)
    onehot = np.zeros((n, class_count))
    onehot[np.arange(n), y] = 1.0
    best: Optional[tuple[float, int, float]] = None  # (score, feature, threshold)
    for j in range(X.shape[1]):
        vals = X[:, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        # Candidate boundaries between distinct adjacent values.
        boundary = np.nonzero(sv[:-1] < sv[1:])[0]
        if len(boundary) == 0:
            continue
        left_counts = np.cumsum(onehot[order], axis=0)[boundary]
        nl = boundary + 1.0
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        totals = onehot.sum(axis=0)
        right_counts = totals[None, :] - left_counts
        score = (left_counts**2).sum(axis=1) / nl + (right_counts**2).sum(axis=1) / nr
        score = np.where(ok, score, -np.inf)
        k = int(np.argmax(score))
        if not np.isfinite(score[k]):
            continue
        threshold = (sv[boundary[k]] + sv[boundary[k] + 1]) / 2.0
        if best is None or score[k] > best[0]:
            best = (float(score[k]), j, float(threshold))
    if best is None:
        return None
    return best[1], best[2]


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    class_count: int,
    config: TreeConfig = TreeConfig(),
) -> "DecisionTreeModel":
    X, y = check_training_inputs(X, y, class_count)
    if config.min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    root = _Node()
    # Explicit stack: adversarial data can produce depth ~ n.
    stack: list[tuple[_Node, np.ndarray, int]] = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        labels = y[idx]
        counts = np.bincount(labels, minlength=class_count).astype(np.float64)
        pure = counts.max() == len(idx)
        at_depth = config.max_depth is not None and depth >= config.max_depth
        split = None
        if not pure and not at_depth:
            split = _best_split(X[idx], labels, class_count, config.min_samples_leaf)
        if split is None:
            node.proba = counts / counts.sum()
            continue
        node.feature, node.threshold = split
        goes_left = X[idx, node.feature] <= node.threshold
        node.left = _Node()
        node.right = _Node()
        stack.append((node.left, idx[goes_left], depth + 1))
        stack.append((node.right, idx[~goes_left], depth + 1))
    return DecisionTreeModel(root, class_count, X.shape[1])


class DecisionTreeModel(TrainedClassifier):
    def __init__(self, root: _Node, class_count: int, n_features: int):
        self.root = root
        self.class_count = class_count
        self.n_features = n_features

    def _proba(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((X.shape[0], self.class_count))
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            if node.proba is not None:
                out[idx] = node.proba
                continue
            goes_left = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[goes_left]))  # type: ignore[arg-type]
            stack.append((node.right, idx[~goes_left]))  # type: ignore[arg-type]
        return out
