#!/usr/bin/env python3
"""Strategy comparison on the bundled synthetic pool, no downloads needed.

Runs entropy+diversity and the random baseline at the same label budget
over 5 loop seeds, then prints final accuracies and the gap. Takes a few
seconds on a laptop.
"""

import argparse
import time

import numpy as np

from al_llm.engine import LoopConfig, run_loop
from al_llm.metrics import kfold
from al_llm.oracle import GroundTruthOracle
from al_llm.synthetic import bundled_pool


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--iterations", type=int, default=16)
    parser.add_argument("--seed-size", type=int, default=20)
    parser.add_argument("--batch-size", type=int, default=5)
    parser.add_argument(
        "--strategies", default="entropy_diversity,coreset,info_density,random"
    )
    args = parser.parse_args()

    corpus, emb = bundled_pool()
    X = emb.vectors.astype(np.float64)
    _, test_idx = kfold(len(corpus), 5, 123)[0]
    budget = args.seed_size + args.iterations * args.batch_size
    print(f"pool {len(corpus)} instances, {corpus.class_count} classes, "
          f"budget {budget} labels, {args.seeds} seeds\n")

    means = {}
    for strategy in args.strategies.split(","):
        start = time.monotonic()
        finals = []
        for seed in range(args.seeds):
            config = LoopConfig(
                seed_size=args.seed_size,
                batch_size=args.batch_size,
                iterations=args.iterations,
                strategy=strategy,
                rng_seed=seed,
            )
            records = run_loop(corpus, X, config, GroundTruthOracle(), test_idx)
            finals.append(records[-1].report.accuracy)
        means[strategy] = float(np.mean(finals))
        print(f"{strategy:20s} mean accuracy {means[strategy]:.4f} "
              f"(per-seed {[round(a, 3) for a in finals]}, "
              f"{time.monotonic() - start:.1f}s)")

    if "random" in means:
        for strategy, mean in means.items():
            if strategy != "random":
                gap = (mean - means["random"]) * 100
                print(f"\n{strategy} vs random: {gap:+.2f} accuracy points")


if __name__ == "__main__":
    main()
