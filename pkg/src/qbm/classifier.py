"""Supervised Boltzmann-machine classifier.

Units are laid out as ``[inputs | hidden layer 1 | ... | hidden layer h |
label units]`` with bipartite connectivity between adjacent layers only
(inputs to the first hidden layer, consecutive hidden layers, last hidden
layer to the label one-hot block).

Training maximises the likelihood of the clamped data by moment matching:
the positive phase pins inputs and the one-hot label and samples the hidden
units, the negative phase pins inputs only, and the per-parameter update
direction is ``<s_i s_j>_data - <s_i s_j>_model`` (``<s_i>`` for biases).
Adam is applied to the negated difference so its usual minimisation recurrence
performs ascent.  Input-unit biases are fixed at zero and carry no gradient.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .adam import AdamHyper, AdamState, adam_update, init_adam
from .energy import (ENUMERATION_LIMIT, EnergyModel, all_states,
                     batch_energies, clamp)
from .errors import CapabilityError, InputError
from .metrics import accuracy, auc_roc_macro
from .rng import derive_rng, derive_seed
from .samplers import Moments

# Upper bound on chain-group width (datapoints * chains) per sampling slice.
_GROUP_COLUMNS = 16384


@dataclass(frozen=True)
class QbmTopology:
    """Layer structure of the classifier network."""

    input_units: int
    label_units: int
    hidden_layers: int
    hidden_total: int
    layer_sizes: tuple

    def __post_init__(self):
        for name in ("input_units", "label_units", "hidden_layers", "hidden_total"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise InputError(f"{name} must be a positive integer")
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) != self.hidden_layers:
            raise InputError(
                f"{len(sizes)} layer sizes for {self.hidden_layers} hidden layers"
            )
        if any(s < 1 for s in sizes):
            raise InputError("hidden layer sizes must be positive")
        if sum(sizes) != self.hidden_total:
            raise InputError(
                f"layer sizes {sizes} sum to {sum(sizes)}, expected {self.hidden_total}"
            )
        object.__setattr__(self, "layer_sizes", sizes)

    @classmethod
    def even_split(cls, input_units: int, label_units: int, hidden_layers: int,
                   hidden_total: int) -> "QbmTopology":
        """Spread the hidden units over the layers as evenly as possible,
        with earlier layers taking the remainder."""
        if hidden_layers < 1 or hidden_total < hidden_layers:
            raise InputError(
                f"cannot split {hidden_total} hidden units over {hidden_layers} layers"
            )
        base, rem = divmod(hidden_total, hidden_layers)
        sizes = tuple([base + 1] * rem + [base] * (hidden_layers - rem))
        return cls(input_units, label_units, hidden_layers, hidden_total, sizes)

    @property
    def num_units(self) -> int:
        return self.input_units + self.hidden_total + self.label_units

    @property
    def input_indices(self) -> np.ndarray:
        return np.arange(self.input_units)

    @property
    def hidden_indices(self) -> np.ndarray:
        return np.arange(self.input_units, self.input_units + self.hidden_total)

    @property
    def label_indices(self) -> np.ndarray:
        return np.arange(self.input_units + self.hidden_total, self.num_units)

    def layer_blocks(self) -> list:
        """Unit index arrays for [inputs, hidden 1, ..., hidden h, labels]."""
        blocks = [self.input_indices]
        start = self.input_units
        for size in self.layer_sizes:
            blocks.append(np.arange(start, start + size))
            start += size
        blocks.append(self.label_indices)
        return blocks

    def build_edge_mask(self) -> np.ndarray:
        """Adjacent-layer bipartite connectivity."""
        n = self.num_units
        mask = np.zeros((n, n), dtype=bool)
        blocks = self.layer_blocks()
        for a, b in zip(blocks, blocks[1:]):
            mask[np.ix_(a, b)] = True
            mask[np.ix_(b, a)] = True
        return mask


@dataclass(frozen=True)
class QbmClassifier:
    """Topology plus parameters plus the effective inverse temperature."""

    topology: QbmTopology
    model: EnergyModel
    beta_eff: float
    trained_epochs: int = 0

    def __post_init__(self):
        if self.model.num_units != self.topology.num_units:
            raise InputError(
                f"model has {self.model.num_units} units, topology expects "
                f"{self.topology.num_units}"
            )
        if not np.array_equal(self.model.edge_mask, self.topology.build_edge_mask()):
            raise InputError("model edge mask does not match the topology")
        if np.any(self.model.biases[self.topology.input_indices] != 0.0):
            raise InputError("input-unit biases must be zero")
        if not (np.isfinite(self.beta_eff) and self.beta_eff > 0):
            raise InputError(f"beta_eff must be a positive real, got {self.beta_eff}")
        if self.trained_epochs < 0:
            raise InputError("trained_epochs cannot be negative")


def masked_edge_pairs(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (i, j) index arrays of the masked pairs with i < j."""
    iu = np.triu_indices(mask.shape[0], k=1)
    keep = mask[iu]
    return iu[0][keep], iu[1][keep]


def init_qbm(topology: QbmTopology, beta_eff: float, seed: int) -> QbmClassifier:
    """Fresh classifier: masked weights and trainable biases uniform on
    [-0.1, 0.1] (weights drawn first), input biases zero."""
    rng = derive_rng(seed)
    mask = topology.build_edge_mask()
    rows, cols = masked_edge_pairs(mask)
    n = topology.num_units
    w = np.zeros((n, n))
    vals = rng.uniform(-0.1, 0.1, rows.size)
    w[rows, cols] = vals
    w[cols, rows] = vals
    b = np.zeros(n)
    trainable = np.concatenate([topology.hidden_indices, topology.label_indices])
    b[trainable] = rng.uniform(-0.1, 0.1, trainable.size)
    return QbmClassifier(topology, EnergyModel(w, b, mask), float(beta_eff))


def _check_input_bits(qbm: QbmClassifier, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != qbm.topology.input_units:
        raise InputError(
            f"feature dimension {arr.shape[-1] if arr.ndim else 0} does not match "
            f"{qbm.topology.input_units} input units"
        )
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise InputError("input features must be binarized to 0/1")
    return arr


def _check_labels(qbm: QbmClassifier, y) -> np.ndarray:
    labels = np.asarray(y)
    if np.any((labels < 0) | (labels >= qbm.topology.label_units)):
        raise InputError(
            f"labels must lie in [0, {qbm.topology.label_units}), got {labels}"
        )
    return labels.astype(np.int64)


def _phase_clamps(qbm: QbmClassifier, x: np.ndarray, y=None) -> list:
    """Clamped models for each row of x: inputs pinned, plus the one-hot
    label block when y is given (positive phase)."""
    topo = qbm.topology
    cms = []
    for d in range(x.shape[0]):
        assignment = {int(i): int(x[d, k]) for k, i in enumerate(topo.input_indices)}
        if y is not None:
            for k, i in enumerate(topo.label_indices):
                assignment[int(i)] = 1 if k == y[d] else 0
        cms.append(clamp(qbm.model, assignment))
    return cms


def _merge_full_moments(cm, first_f: np.ndarray, second_f):
    """Fold clamped values back into full-width moments."""
    n = cm.base.num_units
    free = np.array(cm.free_indices, dtype=np.intp)
    clamped = np.array(sorted(cm.clamp_assignment), dtype=np.intp)
    v = np.array([cm.clamp_assignment[int(i)] for i in clamped], dtype=np.float64)
    first = np.empty(n)
    first[free] = first_f
    first[clamped] = v
    if second_f is None:
        return first, None
    second = np.empty((n, n))
    second[np.ix_(free, free)] = second_f
    cross = np.outer(v, first_f)
    second[np.ix_(clamped, free)] = cross
    second[np.ix_(free, clamped)] = cross.T
    second[np.ix_(clamped, clamped)] = np.outer(v, v)
    np.fill_diagonal(second, first)
    return first, second


def _phase_moments_batch(qbm: QbmClassifier, x: np.ndarray, y, sampler,
                         sample_count: int, seeds, need_second: bool = True):
    """Merged full-width moments for every row of x, one chain group per row.

    Rows are processed in fixed-size slices purely to bound memory; each
    datapoint's randomness is derived from its own seed, so slicing does not
    affect results.
    """
    cms = _phase_clamps(qbm, x, y)
    n = qbm.topology.num_units
    first_out = np.empty((x.shape[0], n))
    second_out = np.empty((x.shape[0], n, n)) if need_second else None
    per_slice = max(1, _GROUP_COLUMNS // int(sample_count))
    for start in range(0, x.shape[0], per_slice):
        part = cms[start:start + per_slice]
        lins = np.stack([cm.reduced.biases for cm in part])
        template = part[0].reduced
        first_f, second_f = sampler.moments_many(
            template, lins, qbm.beta_eff, sample_count, seeds[start:start + len(part)])
        for k, cm in enumerate(part):
            f, s = _merge_full_moments(cm, first_f[k],
                                       second_f[k] if need_second else None)
            first_out[start + k] = f
            if need_second:
                second_out[start + k] = s
    return first_out, second_out


def data_phase_moments(qbm: QbmClassifier, input_bits, label: int, sampler,
                       sample_count: int, seed: int) -> Moments:
    """Positive-phase moments: inputs and one-hot label pinned."""
    x = _check_input_bits(qbm, input_bits)
    y = _check_labels(qbm, [label])
    first, second = _phase_moments_batch(qbm, x, y, sampler, sample_count, [seed])
    return Moments(first[0], second[0])


def model_phase_moments(qbm: QbmClassifier, input_bits, sampler,
                        sample_count: int, seed: int) -> Moments:
    """Negative-phase moments: inputs pinned, hidden and label units free."""
    x = _check_input_bits(qbm, input_bits)
    first, second = _phase_moments_batch(qbm, x, None, sampler, sample_count, [seed])
    return Moments(first[0], second[0])


def predict_scores_many(qbm: QbmClassifier, x, sampler, sample_count: int,
                        seed: int) -> np.ndarray:
    """(N, label_units) class scores; row d uses the seed derived for index d.

    Scores are the sampled label-unit marginals normalised to sum to one; an
    all-zero marginal row falls back to the uniform distribution.
    """
    arr = _check_input_bits(qbm, x)
    seeds = [derive_seed(seed, d) for d in range(arr.shape[0])]
    first, _ = _phase_moments_batch(qbm, arr, None, sampler, sample_count,
                                    seeds, need_second=False)
    raw = first[:, qbm.topology.label_indices]
    totals = raw.sum(axis=1, keepdims=True)
    uniform = np.full_like(raw, 1.0 / qbm.topology.label_units)
    with np.errstate(invalid="ignore"):
        return np.where(totals > 0, raw / np.where(totals > 0, totals, 1.0), uniform)


def predict_scores(qbm: QbmClassifier, input_bits, sampler, sample_count: int,
                   seed: int) -> np.ndarray:
    """Class scores for one datapoint using the given seed directly."""
    x = _check_input_bits(qbm, input_bits)
    first, _ = _phase_moments_batch(qbm, x, None, sampler, sample_count, [seed],
                                    need_second=False)
    raw = first[0, qbm.topology.label_indices]
    total = raw.sum()
    if total <= 0:
        return np.full(qbm.topology.label_units, 1.0 / qbm.topology.label_units)
    return raw / total


def predict(qbm: QbmClassifier, input_bits, sampler, sample_count: int,
            seed: int) -> int:
    """Predicted class: argmax score, lowest index winning ties."""
    return int(np.argmax(predict_scores(qbm, input_bits, sampler, sample_count, seed)))


def _flat_parameters(qbm: QbmClassifier) -> np.ndarray:
    rows, cols = masked_edge_pairs(qbm.model.edge_mask)
    trainable = np.concatenate([qbm.topology.hidden_indices,
                                qbm.topology.label_indices])
    return np.concatenate([qbm.model.weights[rows, cols],
                           qbm.model.biases[trainable]])


def _rebuild_from_flat(qbm: QbmClassifier, flat: np.ndarray) -> QbmClassifier:
    topo = qbm.topology
    mask = qbm.model.edge_mask
    rows, cols = masked_edge_pairs(mask)
    n = topo.num_units
    w = np.zeros((n, n))
    w[rows, cols] = flat[:rows.size]
    w[cols, rows] = flat[:rows.size]
    b = np.zeros(n)
    trainable = np.concatenate([topo.hidden_indices, topo.label_indices])
    b[trainable] = flat[rows.size:]
    return replace(qbm, model=EnergyModel(w, b, mask))


def train_step(qbm: QbmClassifier, batch_bits, batch_labels, sampler,
               sample_count: int, adam_state: AdamState, seed: int):
    """One Adam step on a batch.

    Per datapoint d the positive phase uses the seed derived for (d, 0) and
    the negative phase the one for (d, 1); the ascent direction is the
    batch-mean moment difference on masked edges and trainable biases.
    Returns (updated classifier, updated Adam state, batch statistics).
    """
    x = _check_input_bits(qbm, batch_bits)
    y = _check_labels(qbm, batch_labels)
    if x.shape[0] != y.size or x.shape[0] < 1:
        raise InputError("batch features and labels must align and be non-empty")
    data_seeds = [derive_seed(seed, d, 0) for d in range(x.shape[0])]
    model_seeds = [derive_seed(seed, d, 1) for d in range(x.shape[0])]
    first_d, second_d = _phase_moments_batch(qbm, x, y, sampler, sample_count,
                                             data_seeds)
    first_m, second_m = _phase_moments_batch(qbm, x, None, sampler, sample_count,
                                             model_seeds)
    rows, cols = masked_edge_pairs(qbm.model.edge_mask)
    trainable = np.concatenate([qbm.topology.hidden_indices,
                                qbm.topology.label_indices])
    ascent_w = (second_d - second_m).mean(axis=0)[rows, cols]
    ascent_b = (first_d - first_m).mean(axis=0)[trainable]
    ascent = np.concatenate([ascent_w, ascent_b])
    flat, new_state = adam_update(_flat_parameters(qbm), -ascent, adam_state)
    stats = {"grad_mean_abs": float(np.mean(np.abs(ascent)))}
    return _rebuild_from_flat(qbm, flat), new_state, stats


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int
    epochs: int
    sample_count: int
    adam: AdamHyper
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InputError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 0:
            raise InputError(f"epochs cannot be negative, got {self.epochs}")
        if self.sample_count < 1:
            raise InputError(f"sample_count must be positive, got {self.sample_count}")


@dataclass
class TrainHistory:
    """Per-epoch training metrics, one entry per completed epoch."""

    accuracy: list = field(default_factory=list)
    auc: list = field(default_factory=list)
    grad_magnitude: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.accuracy)


def train(qbm: QbmClassifier, features, labels, config: TrainConfig, sampler):
    """Epoch loop: seeded shuffle, train_step per batch, then training
    accuracy and AUC on the full set.  Returns (classifier, history)."""
    x = _check_input_bits(qbm, features)
    y = _check_labels(qbm, labels)
    if x.shape[0] != y.size or x.shape[0] < 1:
        raise InputError("training set must be non-empty with aligned labels")
    history = TrainHistory()
    state = init_adam(config.adam, _flat_parameters(qbm).size)
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        perm = derive_rng(config.seed, 0, epoch).permutation(x.shape[0])
        mags = []
        for bi, start in enumerate(range(0, x.shape[0], config.batch_size)):
            idx = perm[start:start + config.batch_size]
            step_seed = derive_seed(config.seed, 1, epoch, bi)
            qbm, state, stats = train_step(qbm, x[idx], y[idx], sampler,
                                           config.sample_count, state, step_seed)
            mags.append(stats["grad_mean_abs"])
        scores = predict_scores_many(qbm, x, sampler, config.sample_count,
                                     derive_seed(config.seed, 2, epoch))
        history.accuracy.append(accuracy(scores.argmax(axis=1), y))
        history.auc.append(auc_roc_macro(scores, y))
        history.grad_magnitude.append(float(np.mean(mags)))
        history.wall_seconds.append(time.perf_counter() - t0)
    if config.epochs:
        qbm = replace(qbm, trained_epochs=qbm.trained_epochs + config.epochs)
    return qbm, history


def class_log_probabilities(qbm: QbmClassifier, input_bits) -> np.ndarray:
    """log P(label block = one-hot(c) | inputs) for every class, by
    enumerating the free hidden and label units.

    The label-block probability is normalised over ALL label configurations,
    not just the one-hot ones, so the values need not exp-sum to one.
    """
    x = _check_input_bits(qbm, input_bits)[0]
    topo = qbm.topology
    n_free = topo.hidden_total + topo.label_units
    if n_free > ENUMERATION_LIMIT:
        raise CapabilityError(
            f"enumeration over {n_free} free units exceeds the "
            f"{ENUMERATION_LIMIT}-unit limit"
        )
    assignment = {int(i): int(x[k]) for k, i in enumerate(topo.input_indices)}
    cm = clamp(qbm.model, assignment)
    states = all_states(n_free)
    log_w = qbm.beta_eff * batch_energies(cm.reduced, states)
    log_z = logsumexp(log_w)
    # Free units keep their global order, so the label block is the tail.
    label_bits = states[:, -topo.label_units:]
    out = np.empty(topo.label_units)
    for c in range(topo.label_units):
        onehot = np.zeros(topo.label_units, dtype=np.uint8)
        onehot[c] = 1
        match = np.all(label_bits == onehot, axis=1)
        out[c] = logsumexp(log_w[match]) - log_z
    return out
