#!/usr/bin/env python3
"""Small hyperparameter search over both approaches on synthetic data.

Runs one random search per approach on a shared group split and writes the
usual report files (leaderboard, per-trial histories, charts) into
--out/qbm and --out/fnn.
"""

import argparse
from pathlib import Path

from qbm.harness import (SearchSpace, emit_report, run_search, save_results,
                         search_manifest)
from qbm.pipeline import prepare_records, split_balanced, train_compression
from qbm.synthetic import separable_corpus

import json


def space_for(approach: str) -> SearchSpace:
    common = dict(batch_size=(16, 32), epochs=(2, 5), h=(1, 2), n=(8, 16),
                  learning_rate=(0.005, 0.1), adam_beta1=(0.5, 0.9),
                  adam_beta2=(0.8, 0.999), adam_eps=(1e-8, 0.5))
    if approach == "qbm":
        return SearchSpace(approach="qbm", beta_eff=(0.5, 6.0),
                           sample_count=(10, 40), sampler="gibbs", **common)
    return SearchSpace(approach="fnn", **common)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/search")
    parser.add_argument("--budget", type=int, default=8)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--test-seeds", type=int, default=3)
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    corpus = separable_corpus(groups_per_class=12, images_per_group=4, seed=0)
    layer, _ = train_compression(corpus, epochs=2, seed=0)
    split = split_balanced(prepare_records(layer, corpus), 8, 4, seed=0)
    print(f"data: {len(split.train)} train / {len(split.test)} test records")

    for approach in ("qbm", "fnn"):
        space = space_for(approach)
        results = run_search(space, args.budget, split,
                             master_seed=args.master_seed,
                             train_seed_count=args.seeds,
                             test_seed_count=args.test_seeds,
                             workers=args.workers)
        out = Path(args.out) / approach
        out.mkdir(parents=True, exist_ok=True)
        (out / "search_manifest.json").write_text(json.dumps(
            search_manifest(space, args.budget, "random", args.master_seed,
                            args.seeds, args.test_seeds), indent=1) + "\n")
        save_results(results, out / "results.json")
        emit_report(results, out)
        best = results[0]
        print(f"{approach}: best {best.config.name} "
              f"objective {best.objective:.4f} "
              f"(h={best.config.h}, n={best.config.n}, "
              f"lr={best.config.learning_rate:.4g})")
    print(f"reports in {args.out}")


if __name__ == "__main__":
    main()
