#!/usr/bin/env python3
"""Labeling-scenario comparison against a local gold-scripted mock endpoint.

Starts the scripted chat server in-process, runs full-LLM / hybrid /
full-ground-truth loops on identical folds and seeds, and prints the
per-strategy accuracy spread. With a gold-returning script the three
curves coincide and every std-dev is exactly zero; point the script at a
noisier response file to see the spread move.
"""

import argparse
import threading

import numpy as np

from al_llm.engine import LoopConfig
from al_llm.experiments import ExperimentPlan, run_rq2
from al_llm.mock_server import gold_label_script, make_server
from al_llm.models import ClassifierSpec
from al_llm.oracle import ChatCompletionOracle, GroundTruthOracle, Prices, PromptTemplate
from al_llm.synthetic import make_blobs

TEMPLATE = PromptTemplate(
    expertise="synthetic blob classification",
    task="four-class blob classification task",
    instruction=(
        "classify the following token stream into one of: 0 for class0, "
        "1 for class1, 2 for class2, or 3 for class3"
    ),
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pool-size", type=int, default=400)
    parser.add_argument("--iterations", type=int, default=6)
    parser.add_argument("--folds", type=int, default=2)
    args = parser.parse_args()

    corpus, emb = make_blobs(args.pool_size, 4, 16, 7)
    X = emb.vectors.astype(np.float64)
    script = gold_label_script(corpus, TEMPLATE, prompt_tokens=25, completion_tokens=1)
    server, _book = make_server(script)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    url = f"http://{server.server_address[0]}:{server.server_address[1]}/v1/chat/completions"
    print(f"mock endpoint: {url}")

    def llm_factory(meter):
        return ChatCompletionOracle(
            url, "scripted", TEMPLATE, corpus.class_count, meter=meter, backoff=0.0
        )

    plan = ExperimentPlan(
        loop=LoopConfig(
            seed_size=12, batch_size=5, iterations=args.iterations, rng_seed=3,
            classifier=ClassifierSpec("logistic", {"max_iter": 100}),
        ),
        folds=args.folds,
        strategies=("entropy_diversity",),
        oracle_factory=llm_factory,
        ground_truth_factory=lambda meter: GroundTruthOracle(),
        prices=Prices(0.005, 0.015),
    )
    result = run_rq2(corpus, X, plan)
    for strategy, comparison in result.comparisons.items():
        print(f"\n{strategy}:")
        for scenario, curves in result.arms[strategy].items():
            print(f"  {scenario:18s} final avg accuracy "
                  f"{curves.averaged_curve()[-1]:.4f}")
        print(f"  mean scenario std-dev: {comparison.mean_std:.6f}")
        print(f"  mean accuracy diffs:   {comparison.mean_diffs}")
    server.shutdown()


if __name__ == "__main__":
    main()
