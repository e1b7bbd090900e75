"""The active-learning loop: seed, query, label, update, retrain, record.

Each iteration retrains the classifier from scratch on the labeled set and
evaluates it on the held-out test set before querying, so the record at
iteration t reflects exactly seed_size + t * batch_size acquired labels
(absent labeling failures).  Records are streamed to a JSONL run log and a
learning-curve CSV as they are produced, so a crash leaves a valid prefix.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus
from .metrics import MetricReport, metrics
from .models import ClassifierSpec, TrainedClassifier, train
from .oracle import LabelingFailedError, Oracle, Prices, UsageMeter, ZERO_PRICES
from .rngs import SEED_SET_STREAM, make_rng
from .strategies import PoolState, QuerySelection, select

__all__ = [
    "EngineError",
    "LoopConfig",
    "IterationRecord",
    "RunLogWriter",
    "CURVE_COLUMNS",
    "init_seed",
    "run_loop",
    "substitute_index",
]

CURVE_COLUMNS = (
    "iteration",
    "labeled_count",
    "accuracy",
    "f1",
    "recall",
    "prompt_tokens",
    "completion_tokens",
    "cost_usd",
    "wall_seconds",
)


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class LoopConfig:
    """Loop shape plus strategy and classifier choice."""

    seed_size: int = 50
    batch_size: int = 5
    iterations: int = 100
    strategy: str = "entropy_diversity"
    candidate_factor: int = 10
    classifier: Optional[ClassifierSpec] = None  # None: resolved by strategy
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.seed_size < 1:
            raise EngineError("seed_size must be >= 1")
        if self.batch_size < 1:
            raise EngineError("batch_size must be >= 1")
        if self.iterations < 1:
            raise EngineError("iterations must be >= 1")

    def resolved_classifier(self) -> ClassifierSpec:
        """QBC selects on committee disagreement, so it trains the committee;
        every other strategy defaults to logistic regression."""
        if self.classifier is not None:
            if self.strategy == "qbc" and self.classifier.kind != "committee":
                raise EngineError("strategy 'qbc' requires a committee classifier")
            return self.classifier
        kind = "committee" if self.strategy == "qbc" else "logistic"
        return ClassifierSpec(kind=kind, rng_seed=self.rng_seed)

    def check_class_count(self, class_count: int) -> None:
        if self.seed_size < class_count:
            warnings.warn(
                f"seed_size {self.seed_size} is below the class count {class_count}; "
                "early committees may be degenerate",
                stacklevel=2,
            )


@dataclass(frozen=True)
class FailureNote:
    index: int
    attempts: list[str]


@dataclass(frozen=True)
class IterationRecord:
    """State after the t-th batch was acquired and the model retrained."""

    iteration: int
    queried: list[int]
    labels: list[int]
    labeled_count: int
    report: MetricReport
    usage: dict
    failures: list[FailureNote] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "queried": self.queried,
            "labels": self.labels,
            "labeled_count": self.labeled_count,
            "metrics": self.report.as_dict(),
            "usage": self.usage,
            "failures": [
                {"index": f.index, "attempts": f.attempts} for f in self.failures
            ],
        }


class RunLogWriter:
    """Streams iteration records to a JSONL log and a learning-curve CSV."""

    def __init__(self, jsonl_path: str | Path, csv_path: str | Path):
        self.jsonl_path = Path(jsonl_path)
        self.csv_path = Path(csv_path)
        self._jsonl = self.jsonl_path.open("w", encoding="utf-8")
        self._csv_file = self.csv_path.open("w", newline="", encoding="utf-8")
        self._csv = csv.writer(self._csv_file)
        self._csv.writerow(CURVE_COLUMNS)
        self._flush()

    def append(self, record: IterationRecord) -> None:
        self._jsonl.write(json.dumps(record.as_dict(), ensure_ascii=False) + "\n")
        self._csv.writerow(
            [
                record.iteration,
                record.labeled_count,
                repr(record.report.accuracy),
                repr(record.report.f1),
                repr(record.report.recall),
                record.usage["prompt_tokens"],
                record.usage["completion_tokens"],
                repr(record.usage["cost_usd"]),
                repr(record.usage["wall_seconds"]),
            ]
        )
        self._flush()

    def _flush(self) -> None:
        self._jsonl.flush()
        self._csv_file.flush()

    def close(self) -> None:
        self._jsonl.close()
        self._csv_file.close()

    def __enter__(self) -> "RunLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def init_seed(
    pool: PoolState, config: LoopConfig, oracle: Oracle, corpus: Corpus
) -> PoolState:
    """Label a random seed set; failed candidates are replaced by further draws."""
    if len(pool.unlabeled) < config.seed_size:
        raise EngineError(
            f"pool of {len(pool.unlabeled)} cannot seed {config.seed_size} instances"
        )
    rng = make_rng(config.rng_seed, SEED_SET_STREAM)
    candidates = rng.permutation(np.asarray(pool.unlabeled, dtype=np.int64))
    acquired = 0
    for idx in candidates:
        if acquired == config.seed_size:
            break
        try:
            result = oracle.label(corpus.instances[int(idx)])
        except LabelingFailedError:
            continue
        pool.acquire(int(idx), result.label)
        acquired += 1
    if acquired < config.seed_size:
        raise EngineError(
            f"seed labeling failed: only {acquired}/{config.seed_size} acquired"
        )
    pool.check_conservation()
    return pool


def substitute_index(selection: QuerySelection, taken: set[int]) -> Optional[int]:
    """Next-ranked candidate not yet attempted, or None when exhausted."""
    for idx in selection.ranking:
        if idx not in taken:
            return idx
    return None


def _label_batch(
    selection: QuerySelection,
    batch_size: int,
    oracle: Oracle,
    corpus: Corpus,
) -> tuple[list[int], list[int], list[FailureNote]]:
    """Label up to batch_size candidates, walking the ranking on failures."""
    want = min(batch_size, len(selection.ranking))
    got_idx: list[int] = []
    got_lab: list[int] = []
    failures: list[FailureNote] = []
    taken: set[int] = set()
    while len(got_idx) < want:
        idx = substitute_index(selection, taken)
        if idx is None:
            break
        taken.add(idx)
        try:
            result = oracle.label(corpus.instances[idx])
        except LabelingFailedError as exc:
            failures.append(FailureNote(index=idx, attempts=exc.attempts))
            continue
        got_idx.append(idx)
        got_lab.append(result.label)
    return got_idx, got_lab, failures


def run_loop(
    corpus: Corpus,
    X: np.ndarray,
    config: LoopConfig,
    oracle: Oracle,
    test_indices: Sequence[int],
    *,
    meter: UsageMeter | None = None,
    prices: Prices = ZERO_PRICES,
    pool: PoolState | None = None,
    seed_oracle: Oracle | None = None,
    writer: RunLogWriter | None = None,
) -> list[IterationRecord]:
    """Run the full loop and return one record per completed iteration.

    When ``pool`` is omitted, the pool is everything outside ``test_indices``
    and the seed set is initialized here (with ``seed_oracle`` if given, so
    seed and query labels can come from different sources).  A pre-seeded
    ``pool`` is used as-is.
    """
    class_count = corpus.class_count
    config.check_class_count(class_count)
    test_indices = np.asarray(sorted(int(i) for i in test_indices), dtype=np.int64)
    if X.shape[0] != len(corpus):
        raise EngineError(
            f"embedding rows {X.shape[0]} do not match corpus size {len(corpus)}"
        )
    gold_test = corpus.gold_labels(test_indices)
    meter = meter if meter is not None else UsageMeter()

    if pool is None:
        test_set = set(test_indices.tolist())
        pool = PoolState.from_indices(
            [i for i in range(len(corpus)) if i not in test_set]
        )
        init_seed(pool, config, seed_oracle or oracle, corpus)
    elif not pool.labeled:
        raise EngineError("pool has no labeled seed set; run init_seed first")
    if set(pool.initial) & set(test_indices.tolist()):
        raise EngineError("test set overlaps the pool")

    spec = config.resolved_classifier()
    records: list[IterationRecord] = []
    pending_queried = list(pool.labeled)
    pending_labels = list(pool.labels)
    pending_failures: list[FailureNote] = []
    iteration = 0
    while True:
        model: TrainedClassifier = train(
            spec, X[np.asarray(pool.labeled)], np.asarray(pool.labels), class_count
        )
        report = metrics(gold_test, model.predict(X[test_indices]), class_count)
        record = IterationRecord(
            iteration=iteration,
            queried=pending_queried,
            labels=pending_labels,
            labeled_count=len(pool.labeled),
            report=report,
            usage=meter.snapshot(prices),
            failures=pending_failures,
        )
        pool.check_conservation()
        records.append(record)
        if writer is not None:
            writer.append(record)
        if iteration == config.iterations or not pool.unlabeled:
            break
        selection = select(
            config.strategy,
            pool,
            X,
            model,
            config.batch_size,
            candidate_factor=config.candidate_factor,
            rng_seed=_iteration_seed(config.rng_seed, iteration),
        )
        pending_queried, pending_labels, pending_failures = _label_batch(
            selection, config.batch_size, oracle, corpus
        )
        for idx, lab in zip(pending_queried, pending_labels):
            pool.acquire(idx, lab)
        pool.check_conservation()
        iteration += 1
    return records


def _iteration_seed(rng_seed: int, iteration: int) -> int:
    # Distinct, deterministic stream per iteration for the random strategy.
    return (rng_seed % (1 << 32)) * (1 << 20) + iteration
