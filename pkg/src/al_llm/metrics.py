"""Classification metrics, k-fold splitting, and learning-curve comparison.

Accuracy is always plain proportion correct.  F1 and recall are the binary
definitions (positive class = 1) when there are two classes and the macro
averages otherwise.  Per-class terms with a zero denominator contribute 0
and set the ``zero_division`` flag on the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rngs import make_rng

__all__ = [
    "MetricError",
    "MetricReport",
    "confusion_counts",
    "metrics",
    "kfold",
    "CurveComparison",
    "compare_curves",
]


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    f1: float
    recall: float
    zero_division: bool = False

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "recall": self.recall,
            "zero_division": self.zero_division,
        }


def confusion_counts(gold: Sequence[int], pred: Sequence[int], class_count: int) -> np.ndarray:
    """C x C matrix; entry (i, j) counts gold class i predicted as class j."""
    gold = np.asarray(gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if gold.shape != pred.shape:
        raise MetricError(f"length mismatch: {gold.shape} vs {pred.shape}")
    if len(gold) < 1:
        raise MetricError("empty input")
    for name, arr in (("gold", gold), ("pred", pred)):
        if arr.min() < 0 or arr.max() >= class_count:
            raise MetricError(f"{name} label outside [0, {class_count})")
    counts = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(counts, (gold, pred), 1)
    return counts


def _f1_recall_for_class(counts: np.ndarray, c: int) -> tuple[float, float, bool]:
    tp = float(counts[c, c])
    fp = float(counts[:, c].sum() - counts[c, c])
    fn = float(counts[c, :].sum() - counts[c, c])
    hit_zero = False
    if 2 * tp + fp + fn == 0:
        f1, hit_zero = 0.0, True
    else:
        f1 = 2 * tp / (2 * tp + fp + fn)
    if tp + fn == 0:
        recall, hit_zero = 0.0, True
    else:
        recall = tp / (tp + fn)
    return f1, recall, hit_zero


def metrics(gold: Sequence[int], pred: Sequence[int], class_count: int) -> MetricReport:
    counts = confusion_counts(gold, pred, class_count)
    total = counts.sum()
    accuracy = float(np.trace(counts)) / float(total)
    if class_count == 2:
        f1, recall, zero = _f1_recall_for_class(counts, 1)
    else:
        per = [_f1_recall_for_class(counts, c) for c in range(class_count)]
        f1 = sum(p[0] for p in per) / class_count
        recall = sum(p[1] for p in per) / class_count
        zero = any(p[2] for p in per)
    return MetricReport(accuracy=accuracy, f1=f1, recall=recall, zero_division=zero)


def kfold(n: int, k: int, rng_seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffle then contiguous chunking into k (train, test) pairs.

    Test sets partition 0..n-1; the first n %% k folds get the extra item.
    """
    if k < 2:
        raise MetricError("k must be >= 2")
    if n < k:
        raise MetricError(f"cannot split {n} items into {k} folds")
    perm = make_rng(rng_seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        test = np.sort(perm[start : start + size])
        train = np.sort(np.concatenate([perm[:start], perm[start + size :]]))
        folds.append((train, test))
        start += size
    return folds


@dataclass(frozen=True)
class CurveComparison:
    """Spread statistics across scenario accuracy curves at each iteration."""

    per_iteration_std: list[float]
    mean_std: float
    per_iteration_diffs: dict[str, list[float]] = field(default_factory=dict)
    mean_diffs: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "per_iteration_std": self.per_iteration_std,
            "mean_std": self.mean_std,
            "per_iteration_diffs": self.per_iteration_diffs,
            "mean_diffs": self.mean_diffs,
        }


def compare_curves(
    curves: dict[str, Sequence[float]],
    diff_pairs: Sequence[tuple[str, str]] = (),
) -> CurveComparison:
    """Population std-dev across curves per iteration, plus signed pair diffs.

    ``diff_pairs`` entries (a, b) produce per-iteration ``a - b`` curves
    keyed "a_vs_b"; all curves must have equal length.
    """
    lengths = {len(c) for c in curves.values()}
    if len(lengths) != 1:
        raise MetricError(f"curves have differing lengths: {sorted(lengths)}")
    stacked = np.asarray([list(c) for c in curves.values()], dtype=np.float64)
    std = np.sqrt(((stacked - stacked.mean(axis=0)) ** 2).mean(axis=0))
    # Identical values have zero spread by definition; keep that exact even
    # though the float mean of n equal values can drift by one ulp.
    std = np.where(stacked.max(axis=0) == stacked.min(axis=0), 0.0, std)
    diffs: dict[str, list[float]] = {}
    means: dict[str, float] = {}
    for a, b in diff_pairs:
        delta = np.asarray(curves[a], dtype=np.float64) - np.asarray(curves[b], dtype=np.float64)
        key = f"{a}_vs_{b}"
        diffs[key] = delta.tolist()
        means[key] = float(delta.mean())
    return CurveComparison(
        per_iteration_std=std.tolist(),
        mean_std=float(std.mean()),
        per_iteration_diffs=diffs,
        mean_diffs=means,
    )
