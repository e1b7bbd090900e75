"""Probabilistic classifiers and the spec/train dispatch.

Available kinds: ``logistic`` (multinomial, full-batch gradient descent),
``linear_svm`` (one-vs-rest hinge + Platt scaling), ``decision_tree``
(CART/Gini), ``random_forest`` (100 bagged trees, all features per split),
and ``committee`` (soft vote over the four).  A labeled set containing a
single class short-circuits every kind to a constant classifier that
predicts that class with probability one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .base import ConstantClassifier, ModelError, TrainedClassifier, check_training_inputs
from .committee import DEFAULT_COMMITTEE_MEMBERS, CommitteeModel, fit_committee
from .forest import ForestConfig, RandomForestModel, fit_forest
from .logistic import LogisticConfig, LogisticModel, fit_logistic, loss_and_grad, softmax
from .svm import LinearSvmModel, SvmConfig, fit_linear_svm, fit_platt
from .tree import DecisionTreeModel, TreeConfig, fit_tree

__all__ = [
    "ModelError",
    "TrainedClassifier",
    "ConstantClassifier",
    "ClassifierSpec",
    "train",
    "CommitteeModel",
    "DEFAULT_COMMITTEE_MEMBERS",
    "LogisticConfig",
    "LogisticModel",
    "fit_logistic",
    "loss_and_grad",
    "softmax",
    "SvmConfig",
    "LinearSvmModel",
    "fit_linear_svm",
    "fit_platt",
    "TreeConfig",
    "DecisionTreeModel",
    "fit_tree",
    "ForestConfig",
    "RandomForestModel",
    "fit_forest",
    "fit_committee",
]

KINDS = ("logistic", "linear_svm", "decision_tree", "random_forest", "committee")


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier kind plus kind-specific hyperparameters, validated eagerly."""

    kind: str
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ModelError(f"unknown classifier kind {self.kind!r}")
        self._build_config()  # validates hyperparameters eagerly

    def _build_config(self):
        hp = dict(self.hyperparameters)
        try:
            if self.kind == "logistic":
                return LogisticConfig(**hp)
            if self.kind == "linear_svm":
                return SvmConfig(**hp)
            if self.kind == "decision_tree":
                return TreeConfig(**hp)
            if self.kind == "random_forest":
                return ForestConfig(**hp)
            members = tuple(hp.pop("members", DEFAULT_COMMITTEE_MEMBERS))
            if hp:
                raise TypeError(f"unknown committee hyperparameters {sorted(hp)}")
            if not members:
                raise TypeError("committee needs at least one member")
            for m in members:
                if m not in KINDS or m == "committee":
                    raise TypeError(f"invalid committee member {m!r}")
            return members
        except (TypeError, ValueError) as exc:
            raise ModelError(f"bad hyperparameters for {self.kind}: {exc}") from exc


def train(
    spec: ClassifierSpec,
    X: np.ndarray,
    y: np.ndarray,
    class_count: int | None = None,
) -> TrainedClassifier:
    """Train a classifier from scratch; deterministic given spec.rng_seed.

    ``class_count`` defaults to ``max(y) + 1`` (at least 2) but should be
    passed whenever the labeled set might not contain every class.
    """
    y = np.asarray(y, dtype=np.int64)
    if class_count is None:
        class_count = max(int(y.max()) + 1, 2) if len(y) else 0
    X, y = check_training_inputs(X, y, class_count)
    distinct = np.unique(y)
    if len(distinct) == 1:
        return ConstantClassifier(int(distinct[0]), class_count, X.shape[1])
    config = spec._build_config()
    if spec.kind == "logistic":
        return fit_logistic(X, y, class_count, config)
    if spec.kind == "linear_svm":
        return fit_linear_svm(X, y, class_count, config)
    if spec.kind == "decision_tree":
        return fit_tree(X, y, class_count, config)
    if spec.kind == "random_forest":
        return fit_forest(X, y, class_count, spec.rng_seed, config)
    return fit_committee(X, y, class_count, spec.rng_seed, config)
