#!/usr/bin/env python3
"""Two-step training demo at desk scale, all synthetic.

Stage one trains the 512-to-64 compression layer against its surrogate
head; stage two freezes it, binarizes, splits by group and trains the
sampling classifier next to the parameter-matched feed-forward baseline.
Artifacts and a metrics summary land in --out.
"""

import argparse
import json
import time
from pathlib import Path

from qbm.adam import AdamHyper
from qbm.classifier import (QbmTopology, TrainConfig, init_qbm,
                            predict_scores_many, train)
from qbm.fnn import fnn_forward, fnn_train, init_fnn
from qbm.metrics import accuracy, auc_roc_macro
from qbm.model_io import save_model
from qbm.pipeline import (feature_matrix, prepare_records, split_balanced,
                          train_compression)
from qbm.rng import derive_seed
from qbm.samplers import GibbsSampler
from qbm.synthetic import separable_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk")
    parser.add_argument("--groups-per-class", type=int, default=50)
    parser.add_argument("--images-per-group", type=int, default=6)
    parser.add_argument("--train-groups", type=int, default=20)
    parser.add_argument("--test-groups", type=int, default=5)
    parser.add_argument("--compression-epochs", type=int, default=10)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--hidden-layers", type=int, default=1)
    parser.add_argument("--hidden-units", type=int, default=16)
    parser.add_argument("--learning-rate", type=float, default=0.05)
    parser.add_argument("--beta-eff", type=float, default=2.0)
    parser.add_argument("--sample-count", type=int, default=25)
    parser.add_argument("--sweeps", type=int, default=20,
                        help="Gibbs sweeps per sampling call")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    corpus = separable_corpus(groups_per_class=args.groups_per_class,
                              images_per_group=args.images_per_group,
                              seed=args.seed)
    print(f"corpus: {len(corpus)} synthetic records")

    layer, _ = train_compression(corpus, epochs=args.compression_epochs,
                                 seed=args.seed)
    save_model(layer, out / "compression.json")
    split = split_balanced(prepare_records(layer, corpus), args.train_groups,
                           args.test_groups, seed=args.seed)
    (out / "split_manifest.json").write_text(
        json.dumps(split.manifest, indent=1) + "\n")
    x_train, y_train = feature_matrix(split.train)
    x_test, y_test = feature_matrix(split.test)
    print(f"split: {len(split.train)} train / {len(split.test)} test records")

    topo = QbmTopology.even_split(64, 3, args.hidden_layers, args.hidden_units)
    sampler = GibbsSampler(sweeps=args.sweeps)
    cfg = TrainConfig(batch_size=32, epochs=args.epochs,
                      sample_count=args.sample_count,
                      adam=AdamHyper(learning_rate=args.learning_rate),
                      seed=args.seed)
    qbm = init_qbm(topo, beta_eff=args.beta_eff, seed=args.seed)
    qbm, history = train(qbm, x_train, y_train, cfg, sampler)
    save_model(qbm, out / "classifier.json")
    scores = predict_scores_many(qbm, x_test, sampler, args.sample_count,
                                 derive_seed(args.seed, 9))
    qbm_metrics = {
        "train_accuracy": history.accuracy[-1],
        "train_auc": history.auc[-1],
        "test_accuracy": accuracy(scores.argmax(axis=1), y_test),
        "test_auc": auc_roc_macro(scores, y_test),
    }
    print("sampling classifier:",
          " ".join(f"{k}={v:.4f}" for k, v in qbm_metrics.items()))

    fnn = init_fnn(64, list(topo.layer_sizes), 3, seed=args.seed)
    fnn, fnn_history = fnn_train(fnn, x_train, y_train, cfg)
    save_model(fnn, out / "baseline.json")
    probs = fnn_forward(fnn, x_test)
    fnn_metrics = {
        "train_accuracy": fnn_history.accuracy[-1],
        "train_auc": fnn_history.auc[-1],
        "test_accuracy": accuracy(probs.argmax(axis=1), y_test),
        "test_auc": auc_roc_macro(probs, y_test),
    }
    print("feed-forward baseline:",
          " ".join(f"{k}={v:.4f}" for k, v in fnn_metrics.items()))

    summary = {"qbm": qbm_metrics, "fnn": fnn_metrics,
               "wall_seconds": round(time.perf_counter() - t0, 2)}
    (out / "metrics.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(f"done in {summary['wall_seconds']}s, artifacts in {out}")


if __name__ == "__main__":
    main()
