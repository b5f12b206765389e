"""Experiment orchestration: seeded hyperparameter search over both
classifier kinds, multi-seed training and testing, and report files.

A search draws trial configurations from a :class:`SearchSpace`, runs each
through :func:`run_trial` (training once per train seed, testing once per
test seed), and ranks trials by the mean of final-epoch training accuracy
and training AUC.  Reports mirror the tabular layout used for the
classifier comparison: twelve leading columns of hyperparameters with the
sampler-only fields dashed out for the feed-forward approach, then the
aggregated metrics.

Everything emitted to disk is a pure function of (space, budget, strategy,
master seed, data); wall-clock time is kept in memory only.
"""
from __future__ import annotations

import csv
import json
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .adam import AdamHyper
from .classifier import (QbmTopology, TrainConfig, init_qbm,
                         predict_scores_many, train)
from .errors import InputError, QbmError
from .fnn import fnn_forward, fnn_train, init_fnn
from .metrics import accuracy, auc_roc_macro
from .pipeline import DatasetSplit, feature_matrix
from .rng import derive_rng, derive_seed
from .samplers import (DEFAULT_SCHEDULE, ExactSampler, GibbsSampler,
                       SaSampler)

APPROACH_QBM = "qbm"
APPROACH_FNN = "fnn"

TABLE_COLUMNS = ("approach", "name", "batch_size", "epochs", "h", "n",
                 "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                 "beta_eff", "sample_count")
METRIC_COLUMNS = ("objective",
                  "train_accuracy_mean", "train_accuracy_std",
                  "train_auc_mean", "train_auc_std",
                  "test_accuracy_mean", "test_accuracy_std",
                  "test_auc_mean", "test_auc_std")
NOT_APPLICABLE = "-"

_INT_RANGES = ("batch_size", "epochs", "h", "n")
_FLOAT_RANGES = ("learning_rate", "adam_beta1", "adam_beta2", "adam_eps")
_QBM_ONLY = ("beta_eff", "sample_count", "sampler", "sampler_sweeps")
_SAMPLERS = ("exact", "gibbs", "sa")
_NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def _check_unknown(payload: dict, allowed, what: str):
    unknown = sorted(set(payload) - set(allowed))
    if unknown:
        raise InputError(f"{what}: unknown keys {unknown}")


def _range_pair(value, key, kind):
    try:
        lo, hi = value
    except (TypeError, ValueError):
        raise InputError(f"{key}: expected a [low, high] pair, got {value!r}") from None
    lo, hi = kind(lo), kind(hi)
    if not lo <= hi:
        raise InputError(f"{key}: empty range [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class SearchSpace:
    """Inclusive parameter ranges plus the fixed approach tag.

    The annealing-only fields (beta_eff, sample_count, sampler choice) must
    be absent for the feed-forward approach.
    """

    approach: str
    batch_size: tuple
    epochs: tuple
    h: tuple
    n: tuple
    learning_rate: tuple
    adam_beta1: tuple
    adam_beta2: tuple
    adam_eps: tuple
    beta_eff: tuple = None
    sample_count: tuple = None
    sampler: str = None
    sampler_sweeps: int = None

    def __post_init__(self):
        if self.approach not in (APPROACH_QBM, APPROACH_FNN):
            raise InputError(f"unknown approach {self.approach!r}")
        for key in _INT_RANGES:
            lo, hi = _range_pair(getattr(self, key), key, int)
            if lo < (0 if key == "epochs" else 1):
                raise InputError(f"{key}: range must be positive")
            object.__setattr__(self, key, (lo, hi))
        for key in _FLOAT_RANGES:
            object.__setattr__(self, key, _range_pair(getattr(self, key), key, float))
        if float(self.learning_rate[0]) <= 0:
            raise InputError("learning_rate must be positive")
        if self.approach == APPROACH_FNN:
            for key in _QBM_ONLY:
                if getattr(self, key) is not None:
                    raise InputError(
                        f"{key} is not applicable to the {APPROACH_FNN} approach")
            return
        if self.beta_eff is None or self.sample_count is None:
            raise InputError("qbm search needs beta_eff and sample_count ranges")
        object.__setattr__(self, "beta_eff",
                           _range_pair(self.beta_eff, "beta_eff", float))
        if self.beta_eff[0] <= 0:
            raise InputError("beta_eff must be positive")
        lo, hi = _range_pair(self.sample_count, "sample_count", int)
        if lo < 1:
            raise InputError("sample_count must be at least 1")
        object.__setattr__(self, "sample_count", (lo, hi))
        sampler = self.sampler if self.sampler is not None else "sa"
        if sampler not in _SAMPLERS:
            raise InputError(f"unknown sampler {sampler!r}")
        object.__setattr__(self, "sampler", sampler)
        if self.sampler_sweeps is not None:
            if sampler == "exact":
                raise InputError("sampler_sweeps is not applicable to the exact sampler")
            if int(self.sampler_sweeps) < 1:
                raise InputError("sampler_sweeps must be positive")
            object.__setattr__(self, "sampler_sweeps", int(self.sampler_sweeps))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SearchSpace":
        if not isinstance(payload, dict):
            raise InputError("search space must be a JSON object")
        _check_unknown(payload, [f.name for f in fields(cls)], "search space")
        missing = [k for k in ("approach", *_INT_RANGES, *_FLOAT_RANGES)
                   if k not in payload]
        if missing:
            raise InputError(f"search space: missing keys {missing}")
        return cls(**payload)

    def to_json_dict(self) -> dict:
        out = {"approach": self.approach}
        for key in (*_INT_RANGES, *_FLOAT_RANGES):
            out[key] = list(getattr(self, key))
        if self.approach == APPROACH_QBM:
            out["beta_eff"] = list(self.beta_eff)
            out["sample_count"] = list(self.sample_count)
            out["sampler"] = self.sampler
            if self.sampler_sweeps is not None:
                out["sampler_sweeps"] = self.sampler_sweeps
        return out


@dataclass(frozen=True)
class TrialConfig:
    """One concrete hyperparameter assignment plus its seed lists."""

    approach: str
    name: str
    batch_size: int
    epochs: int
    h: int
    n: int
    learning_rate: float
    adam_beta1: float
    adam_beta2: float
    adam_eps: float
    train_seeds: tuple
    test_seeds: tuple
    beta_eff: float = None
    sample_count: int = None
    sampler: str = None
    sampler_sweeps: int = None

    def __post_init__(self):
        if self.approach not in (APPROACH_QBM, APPROACH_FNN):
            raise InputError(f"unknown approach {self.approach!r}")
        if not _NAME_RE.match(self.name):
            raise InputError(f"trial name {self.name!r} must match {_NAME_RE.pattern}")
        for key in _INT_RANGES:
            value = int(getattr(self, key))
            if value < (0 if key == "epochs" else 1):
                raise InputError(f"{key} must be positive, got {value}")
            object.__setattr__(self, key, value)
        for key in _FLOAT_RANGES:
            object.__setattr__(self, key, float(getattr(self, key)))
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be positive")
        for key in ("train_seeds", "test_seeds"):
            seeds = tuple(int(s) for s in getattr(self, key))
            if not seeds:
                raise InputError(f"{key} must not be empty")
            if len(set(seeds)) != len(seeds):
                raise InputError(f"{key} must be distinct")
            object.__setattr__(self, key, seeds)
        if self.approach == APPROACH_FNN:
            for key in _QBM_ONLY:
                if getattr(self, key) is not None:
                    raise InputError(
                        f"{key} is not applicable to the {APPROACH_FNN} approach")
            return
        if self.beta_eff is None or self.sample_count is None:
            raise InputError("qbm trial needs beta_eff and sample_count")
        object.__setattr__(self, "beta_eff", float(self.beta_eff))
        object.__setattr__(self, "sample_count", int(self.sample_count))
        if self.beta_eff <= 0 or self.sample_count < 1:
            raise InputError("beta_eff must be positive and sample_count >= 1")
        sampler = self.sampler if self.sampler is not None else "sa"
        if sampler not in _SAMPLERS:
            raise InputError(f"unknown sampler {sampler!r}")
        object.__setattr__(self, "sampler", sampler)
        if self.sampler_sweeps is not None:
            if sampler == "exact":
                raise InputError("sampler_sweeps is not applicable to the exact sampler")
            if int(self.sampler_sweeps) < 1:
                raise InputError("sampler_sweeps must be positive")
            object.__setattr__(self, "sampler_sweeps", int(self.sampler_sweeps))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "TrialConfig":
        if not isinstance(payload, dict):
            raise InputError("trial config must be a JSON object")
        _check_unknown(payload, [f.name for f in fields(cls)], "trial config")
        missing = [k for k in ("approach", "name", *_INT_RANGES, *_FLOAT_RANGES,
                               "train_seeds", "test_seeds") if k not in payload]
        if missing:
            raise InputError(f"trial config: missing keys {missing}")
        return cls(**payload)

    def to_json_dict(self) -> dict:
        out = {"approach": self.approach, "name": self.name}
        for key in (*_INT_RANGES, *_FLOAT_RANGES):
            out[key] = getattr(self, key)
        out["train_seeds"] = list(self.train_seeds)
        out["test_seeds"] = list(self.test_seeds)
        if self.approach == APPROACH_QBM:
            out["beta_eff"] = self.beta_eff
            out["sample_count"] = self.sample_count
            out["sampler"] = self.sampler
            if self.sampler_sweeps is not None:
                out["sampler_sweeps"] = self.sampler_sweeps
        return out

    def adam_hyper(self) -> AdamHyper:
        return AdamHyper(learning_rate=self.learning_rate,
                         beta1=self.adam_beta1, beta2=self.adam_beta2,
                         eps=self.adam_eps)

    def build_sampler(self):
        if self.approach != APPROACH_QBM:
            raise InputError("samplers apply to the qbm approach only")
        if self.sampler == "exact":
            return ExactSampler()
        if self.sampler == "gibbs":
            return GibbsSampler(sweeps=self.sampler_sweeps or 100)
        schedule = DEFAULT_SCHEDULE
        if self.sampler_sweeps is not None:
            schedule = replace(schedule, sweeps=self.sampler_sweeps)
        return SaSampler(schedule=schedule)


@dataclass
class TrialResult:
    """Per-seed training and testing outcomes for one configuration.

    Test metrics carry one value per train seed: the average over the
    trial's test seeds, which is how the box summaries are built.
    wall_seconds never reaches emitted files.
    """

    config: TrialConfig
    train_accuracy: tuple
    train_auc: tuple
    test_accuracy: tuple
    test_auc: tuple
    histories: tuple
    objective: float
    wall_seconds: float = field(default=0.0, compare=False)

    def aggregates(self) -> dict:
        out = {}
        for key in ("train_accuracy", "train_auc", "test_accuracy", "test_auc"):
            values = np.asarray(getattr(self, key), dtype=np.float64)
            out[key] = {"mean": float(values.mean()), "std": float(values.std())}
        return out

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "train_accuracy": list(self.train_accuracy),
            "train_auc": list(self.train_auc),
            "test_accuracy": list(self.test_accuracy),
            "test_auc": list(self.test_auc),
            "histories": [dict(h) for h in self.histories],
            "objective": self.objective,
            "aggregates": self.aggregates(),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "TrialResult":
        if not isinstance(payload, dict):
            raise InputError("trial result must be a JSON object")
        _check_unknown(payload, ("config", "train_accuracy", "train_auc",
                                 "test_accuracy", "test_auc", "histories",
                                 "objective", "aggregates"), "trial result")
        try:
            return cls(
                config=TrialConfig.from_json_dict(payload["config"]),
                train_accuracy=tuple(payload["train_accuracy"]),
                train_auc=tuple(payload["train_auc"]),
                test_accuracy=tuple(payload["test_accuracy"]),
                test_auc=tuple(payload["test_auc"]),
                histories=tuple(payload["histories"]),
                objective=float(payload["objective"]),
            )
        except KeyError as exc:
            raise InputError(f"trial result: missing key {exc}") from None


# ----------------------------------------------------------------- trials

def _binary_matrix(records, what: str):
    x, y = feature_matrix(records)
    if records and records[0].stage != "bin64":
        raise InputError(f"{what} records must be binarized (bin64), "
                         f"got {records[0].stage}")
    return x, y


def _evaluate_qbm(model, sampler, sample_count, x, y, seed):
    scores = predict_scores_many(model, x, sampler, sample_count, seed=seed)
    return (accuracy(scores.argmax(axis=1), y),
            auc_roc_macro(scores, y))


def _train_one_seed(config: TrialConfig, seed: int, x_train, y_train):
    layer_sizes = QbmTopology.even_split(x_train.shape[1], 3, config.h,
                                         config.n).layer_sizes
    train_cfg = TrainConfig(batch_size=config.batch_size, epochs=config.epochs,
                            sample_count=config.sample_count or 1,
                            adam=config.adam_hyper(), seed=seed)
    if config.approach == APPROACH_QBM:
        topo = QbmTopology.even_split(x_train.shape[1], 3, config.h, config.n)
        model = init_qbm(topo, config.beta_eff, seed)
        model, history = train(model, x_train, y_train, train_cfg,
                               config.build_sampler())
    else:
        model = init_fnn(x_train.shape[1], layer_sizes, 3, seed)
        model, history = fnn_train(model, x_train, y_train, train_cfg)
    if history.accuracy:
        final_acc = history.accuracy[-1]
        final_auc = history.auc[-1]
    else:
        # untrained run: measure the model as initialized
        if config.approach == APPROACH_QBM:
            final_acc, final_auc = _evaluate_qbm(
                model, config.build_sampler(), config.sample_count,
                x_train, y_train, derive_seed(seed, 2, 0))
        else:
            probs = fnn_forward(model, x_train)
            final_acc = accuracy(probs.argmax(axis=1), y_train)
            final_auc = auc_roc_macro(probs, y_train)
    return model, history, final_acc, final_auc


def run_trial(config: TrialConfig, data: DatasetSplit,
              return_models: bool = False):
    """Train per train seed, test per test seed, aggregate.

    Any error raised while processing one seed is re-raised with that seed
    named, so a 40-minute search points at the culprit.  With
    ``return_models`` the per-seed trained models come back alongside the
    result as ``(result, models)``.
    """
    if not data.train or not data.test:
        raise InputError("trial needs non-empty train and test records")
    x_train, y_train = _binary_matrix(data.train, "train")
    x_test, y_test = _binary_matrix(data.test, "test")
    started = time.perf_counter()
    train_acc, train_auc, test_acc, test_auc, histories = [], [], [], [], []
    models = []
    for seed in config.train_seeds:
        try:
            model, history, final_acc, final_auc = _train_one_seed(
                config, seed, x_train, y_train)
            per_seed_acc, per_seed_auc = [], []
            for test_seed in config.test_seeds:
                if config.approach == APPROACH_QBM:
                    acc, auc = _evaluate_qbm(model, config.build_sampler(),
                                             config.sample_count, x_test,
                                             y_test, test_seed)
                else:
                    # deterministic forward pass; the test seed is recorded
                    # for protocol parity but cannot change the numbers
                    probs = fnn_forward(model, x_test)
                    acc = accuracy(probs.argmax(axis=1), y_test)
                    auc = auc_roc_macro(probs, y_test)
                per_seed_acc.append(acc)
                per_seed_auc.append(auc)
        except QbmError as exc:
            exc.args = (f"training seed {seed}: {exc}",)
            raise
        models.append(model)
        train_acc.append(final_acc)
        train_auc.append(final_auc)
        test_acc.append(float(np.mean(per_seed_acc)))
        test_auc.append(float(np.mean(per_seed_auc)))
        histories.append({
            "seed": int(seed),
            "accuracy": list(history.accuracy),
            "auc": list(history.auc),
            "grad_magnitude": list(history.grad_magnitude),
        })
    objective = (float(np.mean(train_acc)) + float(np.mean(train_auc))) / 2.0
    result = TrialResult(config=config,
                         train_accuracy=tuple(train_acc),
                         train_auc=tuple(train_auc),
                         test_accuracy=tuple(test_acc),
                         test_auc=tuple(test_auc),
                         histories=tuple(histories),
                         objective=objective,
                         wall_seconds=time.perf_counter() - started)
    if return_models:
        return result, models
    return result


# ----------------------------------------------------------------- search

def _searchable_fields(space: SearchSpace):
    names = list(_INT_RANGES + _FLOAT_RANGES)
    if space.approach == APPROACH_QBM:
        names += ["beta_eff", "sample_count"]
    return names


def _draw_field(space: SearchSpace, key: str, rng) -> object:
    lo, hi = getattr(space, key)
    if key in _INT_RANGES or key == "sample_count":
        return int(rng.integers(lo, hi + 1))
    return float(rng.uniform(lo, hi))


def _trial_seeds(master_seed: int, index: int, train_count: int,
                 test_count: int):
    train_seeds = tuple(int(derive_seed(master_seed, 1, index, k))
                        for k in range(train_count))
    test_seeds = tuple(int(derive_seed(master_seed, 2, index, k))
                       for k in range(test_count))
    return train_seeds, test_seeds


def _config_from_values(space: SearchSpace, name: str, values: dict,
                        train_seeds, test_seeds) -> TrialConfig:
    extra = {}
    if space.approach == APPROACH_QBM:
        extra = {"beta_eff": values["beta_eff"],
                 "sample_count": values["sample_count"],
                 "sampler": space.sampler,
                 "sampler_sweeps": space.sampler_sweeps}
    return TrialConfig(approach=space.approach, name=name,
                       batch_size=values["batch_size"], epochs=values["epochs"],
                       h=values["h"], n=values["n"],
                       learning_rate=values["learning_rate"],
                       adam_beta1=values["adam_beta1"],
                       adam_beta2=values["adam_beta2"],
                       adam_eps=values["adam_eps"],
                       train_seeds=train_seeds, test_seeds=test_seeds,
                       **extra)


def sample_trial_config(space: SearchSpace, master_seed: int, index: int,
                        train_seed_count: int, test_seed_count: int) -> TrialConfig:
    """Independent uniform draw of every searchable field (random strategy)."""
    rng = derive_rng(master_seed, 0, index)
    values = {key: _draw_field(space, key, rng)
              for key in _searchable_fields(space)}
    seeds = _trial_seeds(master_seed, index, train_seed_count, test_seed_count)
    return _config_from_values(space, f"run_{index:02d}", values, *seeds)


def _midpoint_values(space: SearchSpace) -> dict:
    values = {}
    for key in _searchable_fields(space):
        lo, hi = getattr(space, key)
        if key in _INT_RANGES or key == "sample_count":
            values[key] = (int(lo) + int(hi)) // 2
        else:
            values[key] = (float(lo) + float(hi)) / 2.0
    return values


def search_manifest(space: SearchSpace, budget: int, strategy: str,
                    master_seed: int, train_seed_count: int,
                    test_seed_count: int) -> dict:
    """Everything that pins down a search, echoed into the output directory."""
    return {
        "space": space.to_json_dict(),
        "budget": int(budget),
        "strategy": strategy,
        "master_seed": int(master_seed),
        "train_seeds_per_trial": int(train_seed_count),
        "test_seeds_per_trial": int(test_seed_count),
    }


def _run_trial_star(args):
    config, data = args
    return run_trial(config, data)


def run_search(space: SearchSpace, budget: int, data: DatasetSplit,
               strategy: str = "random", master_seed: int = 0,
               train_seed_count: int = 10, test_seed_count: int = 10,
               workers: int = 1):
    """Evaluate `budget` configurations; leaderboard sorted by objective.

    random: all configs are drawn up front, so trials are independent and
    may run in a process pool; any worker count gives identical results.
    coordinate: greedy one-field-at-a-time walk from the space midpoint;
    inherently sequential, workers ignored.
    """
    if budget < 1:
        raise InputError("search budget must be at least 1")
    if workers < 1:
        raise InputError("worker count must be at least 1")
    if strategy == "random":
        configs = [sample_trial_config(space, master_seed, i,
                                       train_seed_count, test_seed_count)
                   for i in range(budget)]
        if workers == 1:
            results = [run_trial(c, data) for c in configs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_trial_star,
                                        [(c, data) for c in configs]))
    elif strategy == "coordinate":
        names = _searchable_fields(space)
        current = _midpoint_values(space)
        results = []
        best = -np.inf
        for index in range(budget):
            values = dict(current)
            if index:
                key = names[(index - 1) % len(names)]
                values[key] = _draw_field(space, key,
                                          derive_rng(master_seed, 3, index))
            seeds = _trial_seeds(master_seed, index, train_seed_count,
                                 test_seed_count)
            config = _config_from_values(space, f"run_{index:02d}", values,
                                         *seeds)
            result = run_trial(config, data)
            results.append(result)
            if result.objective > best:
                best = result.objective
                current = values
    else:
        raise InputError(f"unknown search strategy {strategy!r}")
    return sorted(results, key=lambda r: (-r.objective, r.config.name))


# ----------------------------------------------------------------- report

def save_results(results, path) -> None:
    payload = {"results": [r.to_json_dict() for r in results]}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_results(path) -> list:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"results file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not a results file ({exc})") from None
    if not isinstance(payload, dict) or "results" not in payload:
        raise InputError(f"{path}: not a results file")
    return [TrialResult.from_json_dict(item) for item in payload["results"]]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _leaderboard_row(result: TrialResult) -> list:
    config = result.config
    agg = result.aggregates()
    row = []
    for key in TABLE_COLUMNS:
        value = getattr(config, key)
        if key in ("beta_eff", "sample_count") and value is None:
            row.append(NOT_APPLICABLE)
        else:
            row.append(_fmt(value))
    row.append(_fmt(result.objective))
    for metric in ("train_accuracy", "train_auc", "test_accuracy", "test_auc"):
        row.append(_fmt(agg[metric]["mean"]))
        row.append(_fmt(agg[metric]["std"]))
    return row


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#bcbd22")


def _history_matrix(result: TrialResult, key: str):
    rows = [h[key] for h in result.histories if h[key]]
    if not rows or len({len(r) for r in rows}) != 1:
        return None
    return np.asarray(rows, dtype=np.float64)


def _svg_chart(results, key: str, title: str) -> str:
    width, height = 640, 400
    left, right, top, bottom = 60, 190, 40, 40
    plot_w, plot_h = width - left - right, height - top - bottom
    epochs_max = max((len(r.histories[0][key]) for r in results
                      if r.histories and r.histories[0][key]), default=0)

    def sx(epoch):
        if epochs_max <= 1:
            return left + plot_w / 2
        return left + plot_w * (epoch / (epochs_max - 1))

    def sy(value):
        return top + plot_h * (1.0 - value)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="24" font-family="sans-serif" font-size="16">'
        f'{title}</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(tick)
        parts.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + plot_w}" '
                     f'y2="{y:.2f}" stroke="#dddddd"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{tick}</text>')
    parts.append(f'<line x1="{left}" y1="{sy(0.0):.2f}" x2="{left}" '
                 f'y2="{sy(1.0):.2f}" stroke="#333333"/>')
    parts.append(f'<line x1="{left}" y1="{sy(0.0):.2f}" '
                 f'x2="{left + plot_w}" y2="{sy(0.0):.2f}" stroke="#333333"/>')
    parts.append(f'<text x="{left + plot_w / 2:.0f}" y="{height - 10}" '
                 'text-anchor="middle" font-family="sans-serif" '
                 'font-size="12">epoch</text>')
    legend_y = top
    plotted = 0
    for result in results:
        matrix = _history_matrix(result, key)
        if matrix is None:
            continue
        color = _PALETTE[plotted % len(_PALETTE)]
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        upper = np.clip(mean + std, 0.0, 1.0)
        lower = np.clip(mean - std, 0.0, 1.0)
        band = [f"{sx(e):.2f},{sy(v):.2f}" for e, v in enumerate(upper)]
        band += [f"{sx(e):.2f},{sy(v):.2f}"
                 for e, v in reversed(list(enumerate(lower)))]
        name = result.config.name
        parts.append(f'<polygon class="band" data-name="{name}" points="'
                     f'{" ".join(band)}" fill="{color}" fill-opacity="0.15" '
                     'stroke="none"/>')
        line = " ".join(f"{sx(e):.2f},{sy(v):.2f}" for e, v in enumerate(mean))
        parts.append(f'<polyline class="mean" data-name="{name}" points="'
                     f'{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<rect x="{left + plot_w + 12}" y="{legend_y}" '
                     f'width="12" height="12" fill="{color}"/>')
        parts.append(f'<text x="{left + plot_w + 30}" y="{legend_y + 10}" '
                     f'font-family="sans-serif" font-size="11">{name} '
                     f'({result.config.approach})</text>')
        legend_y += 18
        plotted += 1
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _box_stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "min": float(arr.min()), "q1": float(q1),
            "median": float(median), "q3": float(q3),
            "max": float(arr.max())}


def emit_report(results, out_dir) -> list:
    """leaderboard.csv, per-trial history CSVs, SVG training charts, and a
    box-summary CSV of test metrics; byte-stable across reruns."""
    results = list(results)
    if not results:
        raise InputError("cannot report on zero results")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    leaderboard = out / "leaderboard.csv"
    with leaderboard.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(TABLE_COLUMNS) + list(METRIC_COLUMNS))
        for result in results:
            writer.writerow(_leaderboard_row(result))
    written.append(leaderboard)

    for result in results:
        path = out / f"history_{result.config.name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["seed", "epoch", "accuracy", "auc",
                             "grad_magnitude"])
            for history in result.histories:
                for epoch in range(len(history["accuracy"])):
                    writer.writerow([
                        history["seed"], epoch + 1,
                        _fmt(history["accuracy"][epoch]),
                        _fmt(history["auc"][epoch]),
                        _fmt(history["grad_magnitude"][epoch]),
                    ])
        written.append(path)

    for key, fname, title in (("accuracy", "train_accuracy.svg",
                               "Training accuracy (mean over seeds, std band)"),
                              ("auc", "train_auc.svg",
                               "Training AUC (mean over seeds, std band)")):
        path = out / fname
        path.write_text(_svg_chart(results, key, title), encoding="utf-8")
        written.append(path)

    summary = out / "test_summary.csv"
    with summary.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "approach", "metric", "mean", "std", "min",
                         "q1", "median", "q3", "max"])
        for result in results:
            for metric, values in (("test_accuracy", result.test_accuracy),
                                   ("test_auc", result.test_auc)):
                stats = _box_stats(values)
                writer.writerow([result.config.name, result.config.approach,
                                 metric] + [_fmt(stats[k]) for k in
                                            ("mean", "std", "min", "q1",
                                             "median", "q3", "max")])
    written.append(summary)
    return written
