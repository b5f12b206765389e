"""Two-step data path in front of the classifiers.

Incoming 512-dim feature vectors (one row per image, tagged with a group id
for the patient they came from) are pushed through a learned affine
compression to 64 dims, binarized at zero, and split into balanced
group-disjoint train/test sets.  The compression layer is trained once with
a throwaway softmax head and frozen afterwards; downstream training never
updates it.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .adam import AdamHyper, adam_update, init_adam
from .errors import CapabilityError, InputError
from .rng import derive_rng

RAW_DIM = 512
COMPRESSED_DIM = 64
NUM_CLASSES = 3

STAGE_RAW = "raw512"
STAGE_COMPRESSED = "comp64"
STAGE_BINARY = "bin64"
_STAGE_DIMS = {STAGE_RAW: RAW_DIM, STAGE_COMPRESSED: COMPRESSED_DIM,
               STAGE_BINARY: COMPRESSED_DIM}

DEFAULT_LABEL_NAMES = {0: "Covid", 1: "Cap", 2: "Normal"}


@dataclass(frozen=True)
class FeatureRecord:
    """One image's feature vector with its patient group and class label."""

    group_id: str
    label: int
    features: np.ndarray
    stage: str = STAGE_RAW

    def __post_init__(self):
        if not isinstance(self.group_id, str) or not self.group_id:
            raise InputError("group_id must be a non-empty string")
        if self.label not in range(NUM_CLASSES):
            raise InputError(f"unknown label {self.label!r}")
        if self.stage not in _STAGE_DIMS:
            raise InputError(f"unknown stage {self.stage!r}")
        feats = np.array(self.features, dtype=np.float64)
        if feats.shape != (_STAGE_DIMS[self.stage],):
            raise InputError(
                f"stage {self.stage} needs {_STAGE_DIMS[self.stage]} features, "
                f"got shape {feats.shape}"
            )
        if not np.all(np.isfinite(feats)):
            raise InputError("features must be finite")
        if self.stage == STAGE_BINARY and not np.all((feats == 0) | (feats == 1)):
            raise InputError("binary-stage features must be 0 or 1")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class CompressionLayer:
    """Frozen affine map from 512 raw features down to 64."""

    weight: np.ndarray
    bias: np.ndarray
    trained_epochs: int = 0

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.shape != (COMPRESSED_DIM, RAW_DIM) or b.shape != (COMPRESSED_DIM,):
            raise InputError(
                f"compression layer must map {RAW_DIM}->{COMPRESSED_DIM}, "
                f"got weight {w.shape} and bias {b.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InputError("compression parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class SurrogateHead:
    """Throwaway 64->3 softmax head used only while the compression trains."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.shape != (NUM_CLASSES, COMPRESSED_DIM) or b.shape != (NUM_CLASSES,):
            raise InputError("surrogate head must map "
                             f"{COMPRESSED_DIM}->{NUM_CLASSES}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)


@dataclass
class DatasetSplit:
    train: list
    test: list
    manifest: dict = field(default_factory=dict)


# ------------------------------------------------------------------ CSV io

def _feature_columns(count: int) -> list:
    return [f"f{i}" for i in range(count)]


def load_features(path) -> list:
    """Parse a feature CSV into records.

    Accepts the raw-stage header ``group_id,label,f0..f511`` and the staged
    header ``group_id,label,stage,f0..f63``; a header-only file yields an
    empty list.  Malformed rows are rejected with their 1-based line number.
    """
    p = Path(path)
    if not p.exists():
        raise InputError(f"feature file {p} does not exist")
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{p}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        has_stage = len(header) > 2 and header[2] == "stage"
        feat_cols = len(header) - (3 if has_stage else 2)
        expected = (["group_id", "label"] + (["stage"] if has_stage else [])
                    + _feature_columns(feat_cols))
        if header != expected or feat_cols not in (RAW_DIM, COMPRESSED_DIM):
            raise InputError(f"{p}: unrecognized feature-CSV header")
        default_stage = STAGE_RAW if feat_cols == RAW_DIM else STAGE_COMPRESSED

        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{p}:{lineno}: expected {len(header)} fields, got {len(row)}")
            group = row[0]
            try:
                label = int(row[1])
            except ValueError:
                raise InputError(f"{p}:{lineno}: label {row[1]!r} is not an "
                                 "integer") from None
            stage = row[2] if has_stage else default_stage
            try:
                feats = np.array(row[3 if has_stage else 2:], dtype=np.float64)
            except ValueError:
                raise InputError(f"{p}:{lineno}: non-numeric feature value") from None
            if not has_stage and feat_cols == COMPRESSED_DIM and \
                    np.all((feats == 0) | (feats == 1)):
                stage = STAGE_BINARY
            try:
                records.append(FeatureRecord(group, label, feats, stage))
            except InputError as exc:
                raise InputError(f"{p}:{lineno}: {exc}") from None
    return records


def save_features(records, path, label_names=None) -> None:
    """Write records to CSV; all records must share one stage.

    Raw-stage files use the plain header (matching what the feature
    extractor emits); 64-dim stages carry an explicit ``stage`` column.
    With ``label_names`` given, a sidecar ``<path>.labels.json`` is written.
    """
    records = list(records)
    if not records:
        raise InputError("refusing to write an empty feature file")
    stages = {r.stage for r in records}
    if len(stages) > 1:
        raise InputError(f"mixed stages {sorted(stages)} in one file")
    stage = records[0].stage
    dim = _STAGE_DIMS[stage]
    with_stage = stage != STAGE_RAW
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["group_id", "label"] + (["stage"] if with_stage else []) \
            + _feature_columns(dim)
        writer.writerow(header)
        for r in records:
            prefix = [r.group_id, r.label] + ([r.stage] if with_stage else [])
            writer.writerow(prefix + [repr(float(v)) for v in r.features])
    if label_names is not None:
        save_label_names(p.with_suffix(p.suffix + ".labels.json"), label_names)


def save_label_names(path, names=None) -> None:
    names = DEFAULT_LABEL_NAMES if names is None else names
    payload = {str(k): str(v) for k, v in sorted(names.items())}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_label_names(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"label-name file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not a label-name mapping ({exc})") from None
    try:
        return {int(k): str(v) for k, v in payload.items()}
    except (AttributeError, ValueError) as exc:
        raise InputError(f"{path}: not a label-name mapping ({exc})") from None


# ------------------------------------------------- compression training

def _require_stage(records, stage, op):
    for i, r in enumerate(records):
        if r.stage != stage:
            raise InputError(f"{op} needs {stage} records, record {i} is {r.stage}")


def init_compression(seed: int):
    """Seeded Glorot start for the compression layer and surrogate head."""
    rng = derive_rng(seed)
    lim1 = np.sqrt(6.0 / (RAW_DIM + COMPRESSED_DIM))
    lim2 = np.sqrt(6.0 / (COMPRESSED_DIM + NUM_CLASSES))
    layer = CompressionLayer(rng.uniform(-lim1, lim1, (COMPRESSED_DIM, RAW_DIM)),
                             np.zeros(COMPRESSED_DIM))
    head = SurrogateHead(rng.uniform(-lim2, lim2, (NUM_CLASSES, COMPRESSED_DIM)),
                         np.zeros(NUM_CLASSES))
    return layer, head


def surrogate_probabilities(layer: CompressionLayer, head: SurrogateHead,
                            features: np.ndarray) -> np.ndarray:
    z = features @ layer.weight.T + layer.bias
    logits = z @ head.weight.T + head.bias
    logits -= logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def train_compression(records, epochs: int = 10,
                      adam: AdamHyper | None = None, seed: int = 0,
                      batch_size: int = 32):
    """Joint cross-entropy training of the affine compression plus a
    surrogate softmax head; returns (layer, head).  Callers keep the layer
    and drop the head.  epochs=0 returns the seeded initialization."""
    records = list(records)
    if not records:
        raise InputError("cannot train compression on an empty record list")
    _require_stage(records, STAGE_RAW, "train_compression")
    if epochs < 0 or batch_size < 1:
        raise InputError("epochs must be >= 0 and batch_size >= 1")
    adam = adam or AdamHyper(learning_rate=1e-3)
    x = np.stack([r.features for r in records])
    y = np.array([r.label for r in records])
    layer, head = init_compression(seed)
    w1, b1 = layer.weight.copy(), layer.bias.copy()
    w2, b2 = head.weight.copy(), head.bias.copy()
    params = np.concatenate([w1.ravel(), b1, w2.ravel(), b2])
    state = init_adam(adam, params.size)
    for epoch in range(epochs):
        perm = derive_rng(seed, 0, epoch).permutation(len(records))
        for start in range(0, len(records), batch_size):
            idx = perm[start:start + batch_size]
            xb, yb = x[idx], y[idx]
            z = xb @ w1.T + b1
            logits = z @ w2.T + b2
            logits -= logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            probs = e / e.sum(axis=1, keepdims=True)
            delta = probs.copy()
            delta[np.arange(len(idx)), yb] -= 1.0
            delta /= len(idx)
            g_w2 = delta.T @ z
            g_b2 = delta.sum(axis=0)
            dz = delta @ w2
            g_w1 = dz.T @ xb
            g_b1 = dz.sum(axis=0)
            grads = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
            params, state = adam_update(params, grads, state)
            w1 = params[:w1.size].reshape(w1.shape)
            b1 = params[w1.size:w1.size + b1.size]
            off = w1.size + b1.size
            w2 = params[off:off + w2.size].reshape(w2.shape)
            b2 = params[off + w2.size:]
    return (CompressionLayer(w1, b1, trained_epochs=epochs),
            SurrogateHead(w2, b2))


def compress(layer: CompressionLayer, record: FeatureRecord) -> FeatureRecord:
    """Affine 512->64 map; group and label ride along."""
    if record.stage != STAGE_RAW:
        raise InputError(f"compress expects {STAGE_RAW} input, got {record.stage}")
    out = layer.weight @ record.features + layer.bias
    return replace(record, features=out, stage=STAGE_COMPRESSED)


def binarize(record: FeatureRecord) -> FeatureRecord:
    """bit_k = 1 where feature_k > 0; zero and negatives map to 0."""
    if record.stage not in (STAGE_COMPRESSED, STAGE_BINARY):
        raise InputError(f"binarize expects 64-dim input, got {record.stage}")
    bits = (record.features > 0).astype(np.float64)
    return replace(record, features=bits, stage=STAGE_BINARY)


def prepare_records(layer: CompressionLayer, records) -> list:
    """Compression then binarization over a whole raw-stage record list."""
    return [binarize(compress(layer, r)) for r in records]


def feature_matrix(records):
    """(features, labels) arrays from records sharing one stage."""
    records = list(records)
    if not records:
        raise InputError("no records")
    _require_stage(records, records[0].stage, "feature_matrix")
    x = np.stack([r.features for r in records])
    y = np.array([r.label for r in records])
    return x, y


# ------------------------------------------------------------------ split

def _equalize(by_class: dict) -> tuple:
    """Trim per-class record lists to a common image count.

    Surplus images are deleted from the group with the most remaining
    images first (ties: lexicographically smallest group id), dropping that
    group's latest-loaded rows.  Returns (kept records, deletions per class).
    """
    target = min(len(recs) for recs in by_class.values())
    kept, deleted = {}, {}
    for label, recs in by_class.items():
        surplus = len(recs) - target
        deleted[label] = surplus
        counts = {}
        for r in recs:
            counts[r.group_id] = counts.get(r.group_id, 0) + 1
        drop = {g: 0 for g in counts}
        for _ in range(surplus):
            # largest remaining group first; ties go to the smallest id
            best = max(counts.values())
            group = min(g for g, c in counts.items() if c == best)
            counts[group] -= 1
            drop[group] += 1
        remaining = []
        seen = {g: 0 for g in counts}
        # walk records in reverse so the dropped rows are each group's tail
        for r in reversed(recs):
            if seen[r.group_id] < drop[r.group_id]:
                seen[r.group_id] += 1
            else:
                remaining.append(r)
        remaining.reverse()
        kept[label] = remaining
    return kept, deleted


def split_balanced(records, train_groups_per_class: int,
                   test_groups_per_class: int, seed: int = 0) -> DatasetSplit:
    """Group-disjoint, class-balanced train/test split.

    Per class, groups are drawn without replacement by a seeded shuffle of
    the sorted distinct group ids; within each resulting split the
    per-class image counts are then equalized by deletion, largest groups
    first.  A class with fewer than train+test groups raises a capability
    error naming it.
    """
    records = list(records)
    if train_groups_per_class < 1 or test_groups_per_class < 1:
        raise InputError("need at least one group per class on each side")
    groups_by_class = {label: [] for label in range(NUM_CLASSES)}
    for r in records:
        if r.group_id not in groups_by_class[r.label]:
            groups_by_class[r.label].append(r.group_id)
    need = train_groups_per_class + test_groups_per_class
    train_groups, test_groups = {}, {}
    for label in range(NUM_CLASSES):
        groups = sorted(groups_by_class[label])
        if len(groups) < need:
            raise CapabilityError(
                f"class {label} has {len(groups)} groups, need {need}")
        order = derive_rng(seed, label).permutation(len(groups))
        chosen = [groups[i] for i in order]
        train_groups[label] = sorted(chosen[:train_groups_per_class])
        test_groups[label] = sorted(chosen[train_groups_per_class:need])

    def collect(selection):
        by_class = {label: [] for label in range(NUM_CLASSES)}
        for r in records:
            if r.group_id in selection[r.label]:
                by_class[r.label].append(r)
        return by_class

    train_kept, train_deleted = _equalize(collect(train_groups))
    test_kept, test_deleted = _equalize(collect(test_groups))
    train = [r for label in range(NUM_CLASSES) for r in train_kept[label]]
    test = [r for label in range(NUM_CLASSES) for r in test_kept[label]]
    manifest = {
        "seed": int(seed),
        "train": {
            "groups": {label: train_groups[label] for label in range(NUM_CLASSES)},
            "images_per_class": len(train) // NUM_CLASSES,
            "deleted": train_deleted,
        },
        "test": {
            "groups": {label: test_groups[label] for label in range(NUM_CLASSES)},
            "images_per_class": len(test) // NUM_CLASSES,
            "deleted": test_deleted,
        },
    }
    return DatasetSplit(train=train, test=test, manifest=manifest)
