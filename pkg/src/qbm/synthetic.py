"""Synthetic corpora for tests and desk-scale experiments.

Class signal lives on disjoint coordinate blocks, so the three classes are
linearly separable by construction; everything else is seeded Gaussian
noise.  Group structure mimics a clinical corpus where each patient
contributes a variable number of images.
"""
from __future__ import annotations

import numpy as np

from .errors import InputError
from .pipeline import NUM_CLASSES, RAW_DIM, FeatureRecord
from .rng import derive_rng


def class_center(label: int, dim: int = RAW_DIM) -> np.ndarray:
    """Unit-height indicator of the class's coordinate block."""
    block = dim // NUM_CLASSES
    center = np.zeros(dim)
    center[label * block:(label + 1) * block] = 1.0
    return center


def grouped_corpus(sizes_by_class, noise: float = 0.05, seed: int = 0) -> list:
    """Records for explicit per-class group-size lists.

    sizes_by_class maps label -> list of image counts, one entry per group.
    Group ids are ``c<label>_g<index>`` over the list order, and each group
    gets its own derived noise stream, so adding a group never disturbs the
    features of another.
    """
    records = []
    for label in range(NUM_CLASSES):
        sizes = list(sizes_by_class.get(label, []))
        if not sizes or any(s < 1 for s in sizes):
            raise InputError(f"class {label} needs positive group sizes")
        center = class_center(label)
        for g, size in enumerate(sizes):
            rng = derive_rng(seed, label, g)
            noise_block = rng.standard_normal((size, RAW_DIM))
            for k in range(size):
                feats = center + noise * noise_block[k]
                records.append(FeatureRecord(f"c{label}_g{g:02d}", label, feats))
    return records


def separable_corpus(groups_per_class: int = 50, images_per_group: int = 6,
                     noise: float = 0.05, seed: int = 0) -> list:
    """Uniform corpus: every class has the same group count and sizes."""
    sizes = {label: [images_per_group] * groups_per_class
             for label in range(NUM_CLASSES)}
    return grouped_corpus(sizes, noise=noise, seed=seed)


def binary_dataset(num_points: int, input_units: int, flip: float = 0.08,
                   seed: int = 0):
    """Balanced 3-class bit vectors: class prototypes with flip noise.

    Returns (features, labels) with labels cycling 0,1,2 so every prefix is
    roughly balanced.
    """
    if num_points < 1 or input_units < 1:
        raise InputError("need positive num_points and input_units")
    rng = derive_rng(seed)
    prototypes = rng.integers(0, 2, size=(NUM_CLASSES, input_units))
    labels = np.arange(num_points) % NUM_CLASSES
    flips = rng.random((num_points, input_units)) < flip
    x = np.where(flips, 1 - prototypes[labels], prototypes[labels])
    return x.astype(np.float64), labels.astype(np.int64)
