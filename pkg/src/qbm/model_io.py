"""Text-based model containers.

One JSON file per model, self-describing via ``format_version`` and ``kind``
(``qbm``, ``fnn`` or ``compression``).  Floats are written with Python's
shortest round-trip representation, so every binary64 value survives a
save/load cycle exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classifier import QbmClassifier, QbmTopology, masked_edge_pairs
from .energy import EnergyModel
from .errors import (CorruptModelFileError, InputError,
                     ModelFormatVersionError)
from .fnn import FnnModel

FORMAT_VERSION = 1


def _require(payload: dict, key: str, path):
    if key not in payload:
        raise CorruptModelFileError(f"{path}: missing field {key!r}")
    return payload[key]


def save_model(model, path) -> None:
    """Write a classifier (either kind) or compression layer to ``path``."""
    # local import: pipeline depends on this module for layer persistence
    from .pipeline import CompressionLayer

    if isinstance(model, QbmClassifier):
        topo = model.topology
        rows, cols = masked_edge_pairs(model.model.edge_mask)
        payload = {
            "format_version": FORMAT_VERSION,
            "kind": "qbm",
            "topology": {
                "input_units": topo.input_units,
                "label_units": topo.label_units,
                "hidden_layers": topo.hidden_layers,
                "hidden_total": topo.hidden_total,
                "layer_sizes": list(topo.layer_sizes),
            },
            "beta_eff": model.beta_eff,
            "weights": model.model.weights[rows, cols].tolist(),
            "biases": model.model.biases.tolist(),
            "trained_epochs": model.trained_epochs,
        }
    elif isinstance(model, FnnModel):
        payload = {
            "format_version": FORMAT_VERSION,
            "kind": "fnn",
            "input_dim": model.input_dim,
            "hidden_sizes": list(model.hidden_sizes),
            "output_dim": model.output_dim,
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "trained_epochs": model.trained_epochs,
        }
    elif isinstance(model, CompressionLayer):
        payload = {
            "format_version": FORMAT_VERSION,
            "kind": "compression",
            "weight": model.weight.tolist(),
            "bias": model.bias.tolist(),
            "trained_epochs": model.trained_epochs,
        }
    else:
        raise InputError(f"cannot serialise {type(model).__name__}")
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_model(path):
    """Read any container written by :func:`save_model`."""
    from .pipeline import CompressionLayer

    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptModelFileError(f"{path}: not a model container ({exc})") from exc
    if not isinstance(payload, dict):
        raise CorruptModelFileError(f"{path}: expected a JSON object")
    version = _require(payload, "format_version", path)
    if version != FORMAT_VERSION:
        raise ModelFormatVersionError(
            f"{path}: file has format version {version}, this code reads "
            f"{FORMAT_VERSION}"
        )
    kind = _require(payload, "kind", path)
    try:
        if kind == "qbm":
            return _load_qbm(payload, path)
        if kind == "fnn":
            return FnnModel(
                tuple(np.array(w) for w in _require(payload, "weights", path)),
                tuple(np.array(b) for b in _require(payload, "biases", path)),
                int(_require(payload, "trained_epochs", path)),
            )
        if kind == "compression":
            return CompressionLayer(
                np.array(_require(payload, "weight", path)),
                np.array(_require(payload, "bias", path)),
                int(_require(payload, "trained_epochs", path)),
            )
    except (InputError, TypeError, ValueError) as exc:
        raise CorruptModelFileError(f"{path}: invalid model data ({exc})") from exc
    raise CorruptModelFileError(f"{path}: unknown model kind {kind!r}")


def _load_qbm(payload: dict, path) -> QbmClassifier:
    t = _require(payload, "topology", path)
    topo = QbmTopology(t["input_units"], t["label_units"], t["hidden_layers"],
                       t["hidden_total"], tuple(t["layer_sizes"]))
    mask = topo.build_edge_mask()
    rows, cols = masked_edge_pairs(mask)
    vals = np.array(_require(payload, "weights", path), dtype=np.float64)
    if vals.shape != (rows.size,):
        raise CorruptModelFileError(
            f"{path}: {vals.size} weights for {rows.size} masked edges"
        )
    n = topo.num_units
    w = np.zeros((n, n))
    w[rows, cols] = vals
    w[cols, rows] = vals
    biases = np.array(_require(payload, "biases", path), dtype=np.float64)
    if biases.shape != (n,):
        raise CorruptModelFileError(f"{path}: {biases.size} biases for {n} units")
    return QbmClassifier(topo, EnergyModel(w, biases, mask),
                         float(_require(payload, "beta_eff", path)),
                         int(_require(payload, "trained_epochs", path)))
