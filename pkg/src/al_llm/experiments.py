"""Experiment runners over k-fold cross-validation.

Four runners mirror the evaluation protocol: strategy comparison learning
curves (rq1), labeling-scenario comparison with spread statistics (rq2),
the direct-classification baseline with time and cost accounting (rq3),
and the random-sampling baseline at equal label budget (rq4).  Folds,
seeds, and splits are shared across arms so comparisons stay paired.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .corpus import Corpus
from .embedding import EmbeddingMatrix
from .engine import EngineError, IterationRecord, LoopConfig, RunLogWriter, run_loop
from .metrics import CurveComparison, compare_curves, kfold, metrics
from .models import ClassifierSpec, train
from .oracle import Oracle, Prices, UsageMeter, ZERO_PRICES
from .rngs import SAMPLING_STREAM, make_rng

__all__ = [
    "ExperimentPlan",
    "FoldCurves",
    "Rq1Result",
    "Rq2Result",
    "Rq3Result",
    "Rq4Result",
    "run_rq1",
    "run_rq2",
    "run_rq3",
    "run_rq4",
    "RQ2_SCENARIOS",
]

OracleFactory = Callable[[UsageMeter], Oracle]

RQ2_SCENARIOS = ("full_llm", "hybrid", "full_ground_truth")


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything an experiment runner needs beyond the data itself."""

    loop: LoopConfig
    folds: int = 5
    strategies: tuple[str, ...] = ("qbc", "entropy_diversity", "coreset", "info_density")
    oracle_factory: OracleFactory = None  # type: ignore[assignment]
    ground_truth_factory: Optional[OracleFactory] = None  # rq2 human-labeling stand-in
    prices: Prices = ZERO_PRICES
    scenario: str = "oracle"  # label used in artifact filenames for rq1/rq3
    rq4_repeats: int = 5
    parallel_folds: int = 1


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, EmbeddingMatrix):
        X = X.vectors
    return np.asarray(X, dtype=np.float64)


def _fold_seed(rng_seed: int, fold: int) -> int:
    return rng_seed * 100003 + fold


def _fold_loop_config(loop: LoopConfig, strategy: str, fold_seed: int) -> LoopConfig:
    classifier = loop.classifier
    if classifier is not None and strategy == "qbc" and classifier.kind != "committee":
        classifier = None  # let the strategy default kick in
    return LoopConfig(
        seed_size=loop.seed_size,
        batch_size=loop.batch_size,
        iterations=loop.iterations,
        strategy=strategy,
        candidate_factor=loop.candidate_factor,
        classifier=classifier,
        rng_seed=fold_seed,
    )


@dataclass
class FoldCurves:
    """Per-fold iteration records for one (strategy, scenario) arm."""

    strategy: str
    scenario: str
    fold_records: list[list[IterationRecord]]

    def accuracy_curves(self) -> list[list[float]]:
        return [[r.report.accuracy for r in records] for records in self.fold_records]

    def averaged_curve(self) -> list[float]:
        curves = self.accuracy_curves()
        length = min(len(c) for c in curves)
        stacked = np.asarray([c[:length] for c in curves])
        return stacked.mean(axis=0).tolist()

    def final_reports(self) -> list[dict]:
        return [records[-1].report.as_dict() for records in self.fold_records]

    def final_usage(self) -> list[dict]:
        return [records[-1].usage for records in self.fold_records]

    def seed_indices(self) -> list[list[int]]:
        return [records[0].queried for records in self.fold_records]

    def as_dict(self) -> dict:
        finals = self.final_reports()
        return {
            "strategy": self.strategy,
            "scenario": self.scenario,
            "per_fold_final": finals,
            "average_final": {
                key: float(np.mean([f[key] for f in finals]))
                for key in ("accuracy", "f1", "recall")
            },
            "averaged_curve": self.averaged_curve(),
            "per_fold_usage": self.final_usage(),
        }


@dataclass
class FoldRun:
    records: list[IterationRecord]
    meter: UsageMeter


def _run_one_fold(
    corpus: Corpus,
    X: np.ndarray,
    plan: ExperimentPlan,
    strategy: str,
    fold: int,
    train_test: tuple[np.ndarray, np.ndarray],
    outdir: Optional[Path],
    scenario: str,
    oracle_factory: OracleFactory,
    seed_oracle_factory: Optional[OracleFactory] = None,
) -> FoldRun:
    _, test_idx = train_test
    config = _fold_loop_config(plan.loop, strategy, _fold_seed(plan.loop.rng_seed, fold))
    meter = UsageMeter()
    oracle = oracle_factory(meter)
    seed_oracle = seed_oracle_factory(meter) if seed_oracle_factory else None
    writer = None
    if outdir is not None:
        curves = outdir / "curves"
        logs = outdir / "logs"
        curves.mkdir(parents=True, exist_ok=True)
        logs.mkdir(parents=True, exist_ok=True)
        stem = f"{strategy}__{scenario}__fold{fold}"
        writer = RunLogWriter(logs / f"{stem}.jsonl", curves / f"{stem}.csv")
    try:
        records = run_loop(
            corpus,
            X,
            config,
            oracle,
            test_idx,
            meter=meter,
            prices=plan.prices,
            seed_oracle=seed_oracle,
            writer=writer,
        )
        return FoldRun(records=records, meter=meter)
    finally:
        if writer is not None:
            writer.close()


def _map_folds(plan: ExperimentPlan, jobs: list) -> list:
    """Run fold jobs, optionally in parallel; results ordered by job index."""
    if plan.parallel_folds > 1:
        with ThreadPoolExecutor(max_workers=plan.parallel_folds) as pool:
            return list(pool.map(lambda f: f(), jobs))
    return [job() for job in jobs]


@dataclass
class Rq1Result:
    arms: dict[str, FoldCurves]

    def as_dict(self) -> dict:
        return {"mode": "rq1", "strategies": {k: v.as_dict() for k, v in self.arms.items()}}


def run_rq1(
    corpus: Corpus, X, plan: ExperimentPlan, outdir: str | Path | None = None
) -> Rq1Result:
    """Learning curves per strategy, averaged across folds."""
    X = _as_matrix(X)
    outdir = Path(outdir) if outdir is not None else None
    splits = kfold(len(corpus), plan.folds, plan.loop.rng_seed)
    arms: dict[str, FoldCurves] = {}
    for strategy in plan.strategies:
        jobs = [
            (
                lambda s=strategy, f=fold, tt=tt: _run_one_fold(
                    corpus, X, plan, s, f, tt, outdir, plan.scenario, plan.oracle_factory
                )
            )
            for fold, tt in enumerate(splits)
        ]
        runs = _map_folds(plan, jobs)
        arms[strategy] = FoldCurves(strategy, plan.scenario, [r.records for r in runs])
    return Rq1Result(arms=arms)


@dataclass
class Rq2Result:
    arms: dict[str, dict[str, FoldCurves]]  # strategy -> scenario -> curves
    comparisons: dict[str, CurveComparison]

    def as_dict(self) -> dict:
        return {
            "mode": "rq2",
            "strategies": {
                s: {sc: fc.as_dict() for sc, fc in by_scenario.items()}
                for s, by_scenario in self.arms.items()
            },
            "comparisons": {s: c.as_dict() for s, c in self.comparisons.items()},
        }


def run_rq2(
    corpus: Corpus, X, plan: ExperimentPlan, outdir: str | Path | None = None
) -> Rq2Result:
    """Three labeling scenarios under identical folds, seeds, and strategies.

    full_llm labels seed and queries with the configured oracle; hybrid
    takes gold seed labels and oracle queries; full_ground_truth is gold
    throughout.  Seed index lists are asserted identical across scenarios.
    """
    if plan.ground_truth_factory is None:
        raise EngineError("rq2 needs a ground-truth oracle factory")
    X = _as_matrix(X)
    outdir = Path(outdir) if outdir is not None else None
    splits = kfold(len(corpus), plan.folds, plan.loop.rng_seed)
    scenario_oracles: dict[str, tuple[OracleFactory, Optional[OracleFactory]]] = {
        "full_llm": (plan.oracle_factory, None),
        "hybrid": (plan.oracle_factory, plan.ground_truth_factory),
        "full_ground_truth": (plan.ground_truth_factory, None),
    }
    arms: dict[str, dict[str, FoldCurves]] = {}
    comparisons: dict[str, CurveComparison] = {}
    for strategy in plan.strategies:
        by_scenario: dict[str, FoldCurves] = {}
        for scenario in RQ2_SCENARIOS:
            factory, seed_factory = scenario_oracles[scenario]
            jobs = [
                (
                    lambda s=strategy, f=fold, tt=tt, sc=scenario, of=factory, sf=seed_factory: _run_one_fold(
                        corpus, X, plan, s, f, tt, outdir, sc, of, sf
                    )
                )
                for fold, tt in enumerate(splits)
            ]
            runs = _map_folds(plan, jobs)
            by_scenario[scenario] = FoldCurves(
                strategy, scenario, [r.records for r in runs]
            )
        seeds = {sc: fc.seed_indices() for sc, fc in by_scenario.items()}
        if not (seeds["full_llm"] == seeds["hybrid"] == seeds["full_ground_truth"]):
            raise EngineError(f"seed sets differ across scenarios for {strategy}")
        arms[strategy] = by_scenario
        comparisons[strategy] = compare_curves(
            {sc: fc.averaged_curve() for sc, fc in by_scenario.items()},
            diff_pairs=(
                ("full_llm", "full_ground_truth"),
                ("full_llm", "hybrid"),
            ),
        )
    return Rq2Result(arms=arms, comparisons=comparisons)


@dataclass
class Rq3Result:
    direct: dict
    loop: dict
    ratios: dict

    def as_dict(self) -> dict:
        return {"mode": "rq3", "direct": self.direct, "loop": self.loop, "ratios": self.ratios}


def run_rq3(
    corpus: Corpus, X, plan: ExperimentPlan, outdir: str | Path | None = None
) -> Rq3Result:
    """Direct LLM classification of the test folds vs. the full loop.

    Both arms share folds.  Per-arm wall time separates oracle seconds
    (from the meter) from compute seconds; cost comes from token prices.
    """
    X = _as_matrix(X)
    outdir = Path(outdir) if outdir is not None else None
    splits = kfold(len(corpus), plan.folds, plan.loop.rng_seed)
    strategy = plan.strategies[0]

    direct_folds = []
    for fold, (_, test_idx) in enumerate(splits):
        meter = UsageMeter()
        oracle = plan.oracle_factory(meter)
        start = time.monotonic()
        preds = [oracle.label(corpus.instances[int(i)]).label for i in test_idx]
        total = time.monotonic() - start
        report = metrics(corpus.gold_labels(test_idx), preds, corpus.class_count)
        usage = meter.snapshot(plan.prices)
        direct_folds.append(
            {
                "fold": fold,
                "metrics": report.as_dict(),
                "usage": usage,
                "seconds": {
                    "oracle": usage["wall_seconds"],
                    "compute": max(total - usage["wall_seconds"], 0.0),
                    "total": total,
                },
            }
        )

    loop_folds = []
    for fold, tt in enumerate(splits):
        start = time.monotonic()
        run = _run_one_fold(
            corpus, X, plan, strategy, fold, tt, outdir, plan.scenario,
            plan.oracle_factory,
        )
        total = time.monotonic() - start
        usage = run.meter.snapshot(plan.prices)
        loop_folds.append(
            {
                "fold": fold,
                "metrics": run.records[-1].report.as_dict(),
                "usage": usage,
                "seconds": {
                    "oracle": usage["wall_seconds"],
                    "compute": max(total - usage["wall_seconds"], 0.0),
                    "total": total,
                },
            }
        )

    def _avg(folds: list[dict]) -> dict:
        return {
            "accuracy": float(np.mean([f["metrics"]["accuracy"] for f in folds])),
            "cost_usd": float(np.mean([f["usage"]["cost_usd"] for f in folds])),
            "seconds": float(np.mean([f["seconds"]["total"] for f in folds])),
        }

    direct_avg, loop_avg = _avg(direct_folds), _avg(loop_folds)
    ratios = {
        "cost_ratio": (
            loop_avg["cost_usd"] / direct_avg["cost_usd"]
            if direct_avg["cost_usd"] > 0
            else None
        ),
        "time_ratio": (
            loop_avg["seconds"] / direct_avg["seconds"] if direct_avg["seconds"] > 0 else None
        ),
        "accuracy_ratio": (
            loop_avg["accuracy"] / direct_avg["accuracy"] if direct_avg["accuracy"] > 0 else None
        ),
    }
    return Rq3Result(
        direct={"per_fold": direct_folds, "average": direct_avg},
        loop={"per_fold": loop_folds, "average": loop_avg, "strategy": strategy},
        ratios=ratios,
    )


@dataclass
class Rq4Result:
    budget: int
    per_fold: list[dict]
    average_accuracy: float

    def as_dict(self) -> dict:
        return {
            "mode": "rq4",
            "budget": self.budget,
            "per_fold": self.per_fold,
            "average_accuracy": self.average_accuracy,
        }


def run_rq4(
    corpus: Corpus, X, plan: ExperimentPlan, outdir: str | Path | None = None
) -> Rq4Result:
    """Random sampling at the loop's label budget, averaged over repeats.

    Budget = seed_size + iterations * batch_size instances per fold, labeled
    by the configured oracle and used to train the resolved (non-committee)
    classifier once; no querying.
    """
    X = _as_matrix(X)
    splits = kfold(len(corpus), plan.folds, plan.loop.rng_seed)
    loop = plan.loop
    budget = loop.seed_size + loop.iterations * loop.batch_size
    if plan.rq4_repeats < 1:
        raise EngineError("rq4 repeats must be >= 1")
    spec = ClassifierSpec(kind="logistic", rng_seed=loop.rng_seed)
    if loop.classifier is not None and loop.classifier.kind != "committee":
        spec = loop.classifier
    per_fold = []
    for fold, (train_idx, test_idx) in enumerate(splits):
        if budget > len(train_idx):
            raise EngineError(
                f"budget {budget} exceeds fold training pool {len(train_idx)}"
            )
        gold_test = corpus.gold_labels(test_idx)
        accs = []
        for repeat in range(plan.rq4_repeats):
            rng = make_rng(_fold_seed(loop.rng_seed, fold), SAMPLING_STREAM, repeat)
            chosen = rng.choice(train_idx, size=budget, replace=False)
            meter = UsageMeter()
            oracle = plan.oracle_factory(meter)
            labels = [oracle.label(corpus.instances[int(i)]).label for i in chosen]
            model = train(spec, X[chosen], np.asarray(labels), corpus.class_count)
            report = metrics(gold_test, model.predict(X[test_idx]), corpus.class_count)
            accs.append(report.accuracy)
        per_fold.append(
            {
                "fold": fold,
                "per_repeat_accuracy": accs,
                "mean_accuracy": float(np.mean(accs)),
            }
        )
    return Rq4Result(
        budget=budget,
        per_fold=per_fold,
        average_accuracy=float(np.mean([f["mean_accuracy"] for f in per_fold])),
    )
