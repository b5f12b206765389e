"""Pairwise binary energy models: evaluation, clamping, annealer objectives.

A state is a 0/1 vector over ``num_units`` units.  The model assigns

    E(s) = sum_{i<j} w_ij s_i s_j + sum_i b_i s_i

with each unordered pair counted once (weights are stored as a symmetric
zero-diagonal matrix, so the pair sum equals ``0.5 * s @ W @ s``).  The
associated Boltzmann distribution puts probability proportional to
``exp(beta * E(s))`` on each state: under this sign convention HIGHER energy
means MORE probable.  Samplers that minimise an objective at unit temperature
instead consume the negated, temperature-scaled coefficients produced by
:func:`to_minimization_objective`.

State enumeration order: index ``k`` denotes the state whose unit ``i`` holds
bit ``(k >> i) & 1``, i.e. unit 0 is the least significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import logsumexp

from .errors import CapabilityError, InputError

# Hard ceiling for anything that enumerates all 2**n states.
ENUMERATION_LIMIT = 20

# Batch row count used when evaluating energies over large state tables; fixed
# so results never depend on caller-visible workload size.
_ENERGY_BATCH = 1 << 16


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _as_state_matrix(states, num_units: int) -> np.ndarray:
    s = np.asarray(states, dtype=np.float64)
    if s.ndim == 1:
        s = s[None, :]
    if s.ndim != 2 or s.shape[1] != num_units:
        raise InputError(
            f"state has {s.shape[-1] if s.ndim else 0} entries, model has {num_units} units"
        )
    if not np.all((s == 0.0) | (s == 1.0)):
        raise InputError("state entries must be 0 or 1")
    return s


@dataclass(frozen=True)
class EnergyModel:
    """Symmetric pairwise model over binary units.

    ``weights`` is (n, n) symmetric with zero diagonal; ``biases`` is (n,);
    ``edge_mask`` is a symmetric boolean matrix marking which pairs may carry
    a nonzero weight.  Instances are immutable: the arrays are copied on
    construction and marked read-only.
    """

    weights: np.ndarray
    biases: np.ndarray
    edge_mask: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.biases, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InputError(f"weights must be square, got shape {w.shape}")
        n = w.shape[0]
        if b.shape != (n,):
            raise InputError(f"biases shape {b.shape} does not match {n} units")
        if not np.array_equal(w, w.T):
            raise InputError("weights must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise InputError("weights must have a zero diagonal")
        mask = np.array(self.edge_mask, dtype=bool)
        if mask.shape != (n, n):
            raise InputError(f"edge_mask shape {mask.shape} does not match weights")
        if not np.array_equal(mask, mask.T) or np.any(np.diag(mask)):
            raise InputError("edge_mask must be symmetric with a false diagonal")
        if np.any(w[~mask] != 0.0):
            raise InputError("weights must be zero outside the edge mask")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InputError("weights and biases must be finite")
        object.__setattr__(self, "weights", _freeze(w))
        object.__setattr__(self, "biases", _freeze(b))
        object.__setattr__(self, "edge_mask", _freeze(mask))

    @property
    def num_units(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_couplings(cls, num_units: int, couplings: Mapping | None = None,
                       biases=None, edge_mask=None) -> "EnergyModel":
        """Build a model from a ``{(i, j): w}`` mapping.

        With no explicit ``edge_mask`` every off-diagonal pair is allowed.
        """
        w = np.zeros((num_units, num_units))
        for (i, j), val in (couplings or {}).items():
            if i == j:
                raise InputError(f"coupling ({i}, {j}) is on the diagonal")
            w[i, j] = val
            w[j, i] = val
        b = np.zeros(num_units) if biases is None else np.asarray(biases, dtype=np.float64)
        if edge_mask is None:
            edge_mask = ~np.eye(num_units, dtype=bool)
        return cls(w, b, edge_mask)


def energy(model: EnergyModel, state) -> float:
    """E(state) under the pair-counted-once convention."""
    s = _as_state_matrix(state, model.num_units)[0]
    return float(0.5 * s @ model.weights @ s + model.biases @ s)


def batch_energies(model: EnergyModel, states) -> np.ndarray:
    """Energies of a (k, n) batch of states, row by row."""
    s = _as_state_matrix(states, model.num_units)
    out = np.empty(s.shape[0])
    for start in range(0, s.shape[0], _ENERGY_BATCH):
        block = s[start:start + _ENERGY_BATCH]
        out[start:start + _ENERGY_BATCH] = (
            0.5 * np.einsum("ki,ki->k", block @ model.weights, block)
            + block @ model.biases
        )
    return out


def all_states(num_units: int) -> np.ndarray:
    """(2**n, n) table of every state, row k holding bit (k >> i) & 1 at unit i."""
    if num_units > ENUMERATION_LIMIT:
        raise CapabilityError(
            f"enumeration limited to {ENUMERATION_LIMIT} units, got {num_units}"
        )
    ks = np.arange(1 << num_units, dtype=np.uint32)
    return ((ks[:, None] >> np.arange(num_units, dtype=np.uint32)) & 1).astype(np.uint8)


def boltzmann_probability(model: EnergyModel, state, beta: float) -> float:
    """exp(beta * E(state)) / Z by full enumeration; requires n <= 20."""
    if not (np.isfinite(beta) and beta > 0):
        raise InputError(f"beta must be a positive real, got {beta}")
    if model.num_units > ENUMERATION_LIMIT:
        raise CapabilityError(
            f"boltzmann_probability enumerates all states; "
            f"{model.num_units} units exceeds the {ENUMERATION_LIMIT}-unit limit"
        )
    log_weights = beta * batch_energies(model, all_states(model.num_units))
    return float(np.exp(beta * energy(model, state) - logsumexp(log_weights)))


@dataclass(frozen=True)
class ClampedModel:
    """A model with some units pinned to fixed values.

    ``reduced`` is an :class:`EnergyModel` over the free units whose biases
    absorb the interaction with the pinned units; ``offset`` is the constant
    energy of the pinned part, so that for any free-unit state ``f``::

        energy(base, merge(f)) == energy(reduced, f) + offset
    """

    base: EnergyModel
    clamp_assignment: dict
    free_indices: tuple
    reduced: EnergyModel
    offset: float

    def merge(self, free_states) -> np.ndarray:
        """Embed free-unit states back into full-length states."""
        f = _as_state_matrix(free_states, len(self.free_indices))
        full = np.empty((f.shape[0], self.base.num_units))
        for idx, val in self.clamp_assignment.items():
            full[:, idx] = val
        full[:, list(self.free_indices)] = f
        return full


def clamp(model: EnergyModel, assignment: Mapping[int, int]) -> ClampedModel:
    """Pin the units in ``assignment`` to the given 0/1 values.

    The reduced model's bias at free unit i becomes
    ``b_i + sum_{j pinned} w_ij s_j``; pinned-pinned pairs and pinned biases
    move into the scalar offset.
    """
    n = model.num_units
    vals = {}
    for idx, val in assignment.items():
        i = int(idx)
        if not 0 <= i < n:
            raise InputError(f"clamp index {idx} out of range for {n} units")
        if val not in (0, 1):
            raise InputError(f"clamp value for unit {idx} must be 0 or 1, got {val}")
        vals[i] = int(val)
    clamped_idx = sorted(vals)
    free_idx = [i for i in range(n) if i not in vals]
    v = np.array([vals[i] for i in clamped_idx], dtype=np.float64)

    w = model.weights
    reduced_b = model.biases[free_idx].copy()
    if clamped_idx:
        reduced_b += w[np.ix_(free_idx, clamped_idx)] @ v
    reduced_w = w[np.ix_(free_idx, free_idx)]
    reduced_mask = model.edge_mask[np.ix_(free_idx, free_idx)]
    w_cc = w[np.ix_(clamped_idx, clamped_idx)]
    offset = float(0.5 * v @ w_cc @ v + model.biases[clamped_idx] @ v)
    reduced = EnergyModel(reduced_w, reduced_b, reduced_mask)
    return ClampedModel(model, vals, tuple(free_idx), reduced, offset)


def to_minimization_objective(model: EnergyModel, beta_eff: float) -> EnergyModel:
    """Coefficients for a sampler that favours LOW objective values.

    Minimising the returned model's energy function at unit temperature
    realises the source distribution ``P(s) ~ exp(beta_eff * E(s))``, because
    ``exp(-objective) == exp(beta_eff * E)``.  Applying the map twice with
    ``beta_eff=1`` returns the original coefficients.
    """
    if not (np.isfinite(beta_eff) and beta_eff > 0):
        raise InputError(f"beta_eff must be a positive real, got {beta_eff}")
    return EnergyModel(-beta_eff * model.weights, -beta_eff * model.biases,
                       model.edge_mask)
