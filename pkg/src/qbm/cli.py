"""Command-line front end.

Subcommands cover the whole experiment flow: train the compression layer,
prepare a balanced binarized split, train either classifier from a trial
config, run a hyperparameter search, evaluate a saved model, and rebuild
report files from stored results.

File outputs are pure functions of the inputs and seeds; progress and
summary chatter goes to stderr so stdout stays scriptable.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .adam import AdamHyper
from .classifier import QbmClassifier, predict_scores_many
from .errors import InputError, QbmError
from .fnn import FnnModel, fnn_forward
from .harness import (SearchSpace, TrialConfig, emit_report, load_results,
                      run_search, run_trial, save_results, search_manifest)
from .metrics import accuracy, auc_roc_macro
from .model_io import load_model, save_model
from .pipeline import (CompressionLayer, DatasetSplit, feature_matrix,
                       load_features, prepare_records, save_features,
                       split_balanced, surrogate_probabilities,
                       train_compression)
from .samplers import DEFAULT_SCHEDULE, make_sampler


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _read_json(path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"{what} file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _write_json(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def _load_split(data_dir) -> DatasetSplit:
    root = Path(data_dir)
    train_path = root / "train.csv"
    test_path = root / "test.csv"
    if not train_path.exists() or not test_path.exists():
        raise InputError(f"{root} must contain train.csv and test.csv "
                         "(produce them with `qbm prepare`)")
    manifest = {}
    manifest_path = root / "split_manifest.json"
    if manifest_path.exists():
        manifest = _read_json(manifest_path, "split manifest")
    return DatasetSplit(train=load_features(train_path),
                        test=load_features(test_path), manifest=manifest)


def _build_eval_sampler(args):
    schedule = DEFAULT_SCHEDULE
    if args.sampler_sweeps is not None:
        if args.sampler == "exact":
            raise InputError("--sampler-sweeps does not apply to the exact sampler")
        schedule = replace(schedule, sweeps=args.sampler_sweeps)
    return make_sampler(args.sampler, gibbs_sweeps=args.sampler_sweeps or 100,
                        sa_schedule=schedule)


# ------------------------------------------------------------- commands

def _cmd_train_compression(args) -> int:
    records = load_features(args.features)
    layer, head = train_compression(
        records, epochs=args.epochs,
        adam=AdamHyper(learning_rate=args.learning_rate),
        seed=args.seed, batch_size=args.batch_size)
    save_model(layer, args.out)
    x, y = feature_matrix(records)
    probs = surrogate_probabilities(layer, head, x)
    acc = accuracy(probs.argmax(axis=1), y)
    _info(f"compression trained on {len(records)} records, "
          f"{args.epochs} epochs, surrogate accuracy {acc:.3f}")
    _info(f"wrote {args.out}")
    return 0


def _cmd_prepare(args) -> int:
    records = load_features(args.features)
    layer = load_model(args.layer)
    if not isinstance(layer, CompressionLayer):
        raise InputError(f"{args.layer} is not a compression layer")
    prepared = prepare_records(layer, records)
    split = split_balanced(prepared, args.train_groups, args.test_groups,
                           seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_features(split.train, out / "train.csv")
    save_features(split.test, out / "test.csv")
    _write_json(split.manifest, out / "split_manifest.json")
    _info(f"split {len(records)} records -> {len(split.train)} train / "
          f"{len(split.test)} test "
          f"({split.manifest['train']['images_per_class']} and "
          f"{split.manifest['test']['images_per_class']} per class)")
    _info(f"wrote {out / 'train.csv'}, {out / 'test.csv'}")
    return 0


def _cmd_train(args, approach: str) -> int:
    config = TrialConfig.from_json_dict(_read_json(args.config, "trial config"))
    if config.approach != approach:
        raise InputError(f"config approach {config.approach!r} does not match "
                         f"the train-{approach} command")
    data = _load_split(args.data)
    result, models = run_trial(config, data, return_models=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_results([result], out / "results.json")
    for seed, model in zip(config.train_seeds, models):
        save_model(model, out / f"model_seed{seed}.json")
    agg = result.aggregates()
    _info(f"trial {config.name}: objective {result.objective:.4f}, "
          f"train accuracy {agg['train_accuracy']['mean']:.3f}, "
          f"test accuracy {agg['test_accuracy']['mean']:.3f}")
    _info(f"wrote {out / 'results.json'} and {len(models)} model files")
    return 0


def _cmd_search(args) -> int:
    space = SearchSpace.from_json_dict(_read_json(args.space, "search space"))
    data = _load_split(args.data)
    results = run_search(space, args.budget, data, strategy=args.strategy,
                         master_seed=args.master_seed,
                         train_seed_count=args.seeds,
                         test_seed_count=args.test_seeds,
                         workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(search_manifest(space, args.budget, args.strategy,
                                args.master_seed, args.seeds, args.test_seeds),
                out / "search_manifest.json")
    save_results(results, out / "results.json")
    emit_report(results, out)
    for result in results[:3]:
        _info(f"best: {result.config.name} objective {result.objective:.4f} "
              f"(h={result.config.h}, n={result.config.n})")
    _info(f"wrote search outputs to {out}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    records = load_features(args.test)
    x, y = feature_matrix(records)
    if records[0].stage != "bin64":
        raise InputError("evaluate expects binarized (bin64) test records")
    seeds = list(range(args.test_seeds))
    per_seed = []
    if isinstance(model, QbmClassifier):
        sampler = _build_eval_sampler(args)
        for seed in seeds:
            scores = predict_scores_many(model, x, sampler,
                                         args.sample_count, seed=seed)
            per_seed.append({"seed": seed,
                             "accuracy": accuracy(scores.argmax(axis=1), y),
                             "auc": auc_roc_macro(scores, y)})
    elif isinstance(model, FnnModel):
        probs = fnn_forward(model, x)
        acc = accuracy(probs.argmax(axis=1), y)
        auc = auc_roc_macro(probs, y)
        # the forward pass is deterministic; seeds are recorded for parity
        per_seed = [{"seed": seed, "accuracy": acc, "auc": auc}
                    for seed in seeds]
    else:
        raise InputError("evaluate needs a classifier model, "
                         f"got {type(model).__name__}")
    payload = {
        "kind": "qbm" if isinstance(model, QbmClassifier) else "fnn",
        "records": len(records),
        "per_seed": per_seed,
        "accuracy_mean": sum(e["accuracy"] for e in per_seed) / len(per_seed),
        "auc_mean": sum(e["auc"] for e in per_seed) / len(per_seed),
    }
    print(json.dumps(payload, indent=1))
    return 0


def _cmd_report(args) -> int:
    results = load_results(Path(args.infile) / "results.json")
    written = emit_report(results, args.out)
    _info(f"wrote {len(written)} report files to {args.out}")
    return 0


# ------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbm",
        description="Boltzmann-machine classifier experiments: compression, "
                    "balanced splits, training, search, and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-compression",
                       help="train the 512->64 compression layer")
    p.add_argument("--features", required=True, help="raw 512-dim feature CSV")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.set_defaults(func=_cmd_train_compression)

    p = sub.add_parser("prepare",
                       help="compress, binarize and split a feature CSV")
    p.add_argument("--features", required=True, help="raw 512-dim feature CSV")
    p.add_argument("--layer", required=True, help="compression layer file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train-groups", type=int, default=20,
                   help="groups per class in the train split")
    p.add_argument("--test-groups", type=int, default=5,
                   help="groups per class in the test split")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_prepare)

    for approach in ("qbm", "fnn"):
        p = sub.add_parser(f"train-{approach}",
                           help=f"run one {approach} trial from a config file")
        p.add_argument("--config", required=True, help="trial config JSON")
        p.add_argument("--data", required=True,
                       help="directory with train.csv and test.csv")
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=lambda args, a=approach: _cmd_train(args, a))

    p = sub.add_parser("search", help="hyperparameter search over a space")
    p.add_argument("--space", required=True, help="search space JSON")
    p.add_argument("--data", required=True,
                   help="directory with train.csv and test.csv")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--budget", type=int, default=55,
                   help="number of trials to run")
    p.add_argument("--seeds", type=int, default=10,
                   help="training seeds per trial")
    p.add_argument("--test-seeds", type=int, default=10,
                   help="test seeds per trial")
    p.add_argument("--strategy", choices=("random", "coordinate"),
                   default="random")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel trial processes (random strategy)")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("evaluate", help="apply a saved model to a test CSV")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--test", required=True, help="binarized test CSV")
    p.add_argument("--test-seeds", type=int, default=10,
                   help="evaluation seeds 0..N-1")
    p.add_argument("--sampler", choices=("exact", "gibbs", "sa"), default="sa")
    p.add_argument("--sampler-sweeps", type=int, default=None)
    p.add_argument("--sample-count", type=int, default=25)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="rebuild report files from results.json")
    p.add_argument("--in", dest="infile", required=True,
                   help="directory holding results.json")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QbmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
