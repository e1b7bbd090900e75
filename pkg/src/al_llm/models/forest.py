"""Random forest: bagged CART trees, all features considered at every split.

Each tree gets its own Philox stream derived from (rng_seed, tree index),
so training is bit-deterministic regardless of how trees might be
scheduled.  Probabilities are the mean of per-tree leaf class frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..rngs import FOREST_STREAM, make_rng
from .base import TrainedClassifier, check_training_inputs
from .tree import DecisionTreeModel, TreeConfig, fit_tree

__all__ = ["ForestConfig", "RandomForestModel", "fit_forest"]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")


class RandomForestModel(TrainedClassifier):
    def __init__(self, trees: list[DecisionTreeModel], class_count: int, n_features: int):
        self.trees = trees
        self.class_count = class_count
        self.n_features = n_features

    def _proba(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros((X.shape[0], self.class_count))
        for tree in self.trees:
            acc += tree._proba(X)
        return acc / len(self.trees)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    class_count: int,
    rng_seed: int,
    config: ForestConfig = ForestConfig(),
) -> RandomForestModel:
    X, y = check_training_inputs(X, y, class_count)
    n = len(y)
    tree_config = TreeConfig(max_depth=config.max_depth)
    trees = []
    for i in range(config.n_trees):
        rng = make_rng(rng_seed, FOREST_STREAM, i)
        boot = rng.integers(0, n, size=n)
        trees.append(fit_tree(X[boot], y[boot], class_count, tree_config))
    return RandomForestModel(trees, class_count, X.shape[1])
