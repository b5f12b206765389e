"""Classification metrics: accuracy and macro one-vs-rest AUC-ROC.

The AUC uses the rank-statistic form of the pairwise comparison: with average
ranks over the pooled scores, ``AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos *
n_neg)``, which counts tied positive/negative pairs as one half.  The macro
value averages the one-vs-rest AUC over the classes present in the labels.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import InputError, UndefinedMetricError


def accuracy(predictions, labels) -> float:
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1:
        raise InputError(f"predictions {p.shape} and labels {y.shape} must be equal-length vectors")
    if p.size == 0:
        raise InputError("accuracy of an empty set is undefined")
    return float(np.mean(p == y))


def auc_roc_macro(scores, labels) -> float:
    """Macro one-vs-rest AUC from per-class score columns.

    ``scores`` is (N, C) with rows summing to ~1; ``labels`` holds integers in
    ``range(C)``.  Needs at least two distinct classes to be defined.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 2 or y.shape != (s.shape[0],):
        raise InputError(f"scores {s.shape} and labels {y.shape} are inconsistent")
    if s.shape[0] == 0:
        raise InputError("AUC of an empty set is undefined")
    if np.any((y < 0) | (y >= s.shape[1])):
        raise InputError("labels must index the score columns")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    row_sums = s.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise InputError("score rows must sum to 1")
    present = np.unique(y)
    if present.size < 2:
        raise UndefinedMetricError("AUC needs at least two classes present")
    per_class = []
    for c in present:
        pos = y == c
        n_pos = int(pos.sum())
        n_neg = y.size - n_pos
        ranks = rankdata(s[:, c], method="average")
        r_pos = float(ranks[pos].sum())
        per_class.append((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
    return float(np.mean(per_class))
