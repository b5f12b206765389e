"""Shared helpers for the test suite."""
import numpy as np

from qbm.energy import EnergyModel
from qbm.rng import derive_rng


def random_dense_model(num_units: int, seed: int, scale: float = 1.0) -> EnergyModel:
    """Fully connected model with weights and biases uniform on [-scale, scale]."""
    rng = derive_rng(seed)
    w = rng.uniform(-scale, scale, (num_units, num_units))
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 0.0)
    b = rng.uniform(-scale, scale, num_units)
    return EnergyModel(w, b, ~np.eye(num_units, dtype=bool))


def state_indices(states: np.ndarray) -> np.ndarray:
    """Map 0/1 state rows to enumeration indices (unit 0 = least significant bit)."""
    n = states.shape[1]
    return states.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))


def tv_distance(probs: np.ndarray, states: np.ndarray) -> float:
    """Total variation between an enumerated distribution and sampled states."""
    emp = np.bincount(state_indices(states), minlength=probs.size) / states.shape[0]
    return float(0.5 * np.abs(emp - probs).sum())
