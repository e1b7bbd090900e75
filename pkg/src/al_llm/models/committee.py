"""Soft-voting committee over heterogeneous classifiers.

The committee probability is the exact arithmetic mean of its members'
predicted probabilities; the member list is configurable so the averaging
width can be changed without touching callers.
"""

from __future__ import annotations

import numpy as np

from .base import TrainedClassifier

__all__ = ["DEFAULT_COMMITTEE_MEMBERS", "CommitteeModel", "fit_committee"]

DEFAULT_COMMITTEE_MEMBERS = ("linear_svm", "decision_tree", "random_forest", "logistic")


class CommitteeModel(TrainedClassifier):
    def __init__(self, members: list[TrainedClassifier]):
        if not members:
            raise ValueError("committee needs at least one member")
        counts = {m.class_count for m in members}
        if len(counts) != 1:
            raise ValueError(f"members disagree on class_count: {counts}")
        self.members = members
        self.class_count = members[0].class_count
        self.n_features = members[0].n_features

    def _proba(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros((X.shape[0], self.class_count))
        for member in self.members:
            total = total + member._proba(X)
        return total / len(self.members)


def fit_committee(
    X: np.ndarray,
    y: np.ndarray,
    class_count: int,
    rng_seed: int,
    member_kinds: tuple[str, ...] = DEFAULT_COMMITTEE_MEMBERS,
) -> CommitteeModel:
    from . import ClassifierSpec, train  # cycle: dispatch lives one level up

    members = [
        train(ClassifierSpec(kind=kind, rng_seed=rng_seed), X, y, class_count)
        for kind in member_kinds
    ]
    return CommitteeModel(members)
