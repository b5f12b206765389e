"""Boltzmann sampling backends: exact draws, Gibbs chains, simulated annealing.

All backends target the same distribution ``P(s) ~ exp(beta * E(s))`` over the
states of an :class:`~qbm.energy.EnergyModel` and share one calling surface:

    sample(model, beta, count, seed)  -> SampleSet
    moments(model, beta, count, seed) -> Moments

Chains are vectorised across fixed-size chunks; each chunk derives its own
generator from (seed, chunk_index), so the result is bit-identical no matter
how many workers execute the chunks or how large the surrounding workload is.
The grouped entry point :meth:`moments_many` runs one chain group per
datapoint (shared weights, per-datapoint linear terms) and reproduces the
per-datapoint calls exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import ClassVar, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .energy import (EnergyModel, all_states, batch_energies,
                     to_minimization_objective)
from .errors import InputError
from .rng import derive_rng

# Chains per generator chunk.  Fixed: changing it changes sampled bits.
_CHAIN_CHUNK = 8192


@dataclass(frozen=True)
class AnnealSchedule:
    """Inverse-temperature ramp for the annealing sampler."""

    sweeps: int = 1000
    beta_start: float = 0.1
    beta_end: float = 1.0
    interpolation: str = "geometric"

    def __post_init__(self):
        if self.sweeps < 1:
            raise InputError(f"schedule needs at least one sweep, got {self.sweeps}")
        if not (0 < self.beta_start <= self.beta_end):
            raise InputError(
                f"need 0 < beta_start <= beta_end, got {self.beta_start}, {self.beta_end}"
            )
        if self.interpolation not in ("geometric", "linear"):
            raise InputError(f"unknown interpolation {self.interpolation!r}")

    def betas(self) -> np.ndarray:
        if self.interpolation == "geometric":
            return np.geomspace(self.beta_start, self.beta_end, self.sweeps)
        return np.linspace(self.beta_start, self.beta_end, self.sweeps)


DEFAULT_SCHEDULE = AnnealSchedule()


@dataclass(frozen=True)
class SampleSet:
    """States drawn by one backend, one row per sample."""

    states: np.ndarray
    model_units: int
    seed: int
    backend_tag: str

    def __post_init__(self):
        s = np.array(self.states, dtype=np.uint8)
        if s.ndim != 2 or s.shape[0] < 1:
            raise InputError("states must be a non-empty (count, n) array")
        if s.shape[1] != self.model_units:
            raise InputError(
                f"state width {s.shape[1]} does not match model_units {self.model_units}"
            )
        if np.any(s > 1):
            raise InputError("states must be 0/1")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @property
    def count(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class Moments:
    """First moments <s_i> and second moments <s_i s_j>.

    The diagonal of ``second`` duplicates ``first`` (s_i^2 == s_i for binary
    units).
    """

    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        f = np.array(self.first, dtype=np.float64)
        m = np.array(self.second, dtype=np.float64)
        if f.ndim != 1 or m.shape != (f.size, f.size):
            raise InputError(f"moment shapes {f.shape}, {m.shape} are inconsistent")
        f.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "first", f)
        object.__setattr__(self, "second", m)


def _check_beta(beta: float, name: str = "beta") -> float:
    if not (np.isfinite(beta) and beta > 0):
        raise InputError(f"{name} must be a positive real, got {beta}")
    return float(beta)


def _check_count(count: int) -> int:
    if int(count) != count or count < 1:
        raise InputError(f"count must be a positive integer, got {count}")
    return int(count)


def enumerate_distribution(model: EnergyModel, beta: float) -> np.ndarray:
    """Exact probabilities over all 2**n states, in state-index order."""
    _check_beta(beta)
    log_w = beta * batch_energies(model, all_states(model.num_units))
    return np.exp(log_w - logsumexp(log_w))


def exact_moments(model: EnergyModel, beta: float) -> Moments:
    """Moments of the enumerated distribution (no sampling noise)."""
    p = enumerate_distribution(model, beta)
    s = all_states(model.num_units).astype(np.float64)
    first = p @ s
    second = (s * p[:, None]).T @ s
    np.fill_diagonal(second, first)
    return Moments(first, second)


def estimate_moments(samples: SampleSet) -> Moments:
    """Empirical moments of a sample set."""
    s = samples.states.astype(np.float64)
    first = s.mean(axis=0)
    second = s.T @ s / samples.count
    np.fill_diagonal(second, first)
    return Moments(first, second)


def _chunk_sizes(count: int) -> list[int]:
    sizes = [_CHAIN_CHUNK] * (count // _CHAIN_CHUNK)
    if count % _CHAIN_CHUNK:
        sizes.append(count % _CHAIN_CHUNK)
    return sizes


def sample_exact(model: EnergyModel, beta: float, count: int, seed: int) -> SampleSet:
    """Independent categorical draws from the enumerated distribution."""
    _check_count(count)
    p = enumerate_distribution(model, beta)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    idx = np.empty(count, dtype=np.int64)
    start = 0
    for k, m in enumerate(_chunk_sizes(count)):
        rng = derive_rng(seed, k)
        u = rng.random(m)
        idx[start:start + m] = np.searchsorted(cdf, u, side="right")
        start += m
    np.clip(idx, 0, p.size - 1, out=idx)
    states = all_states(model.num_units)[idx]
    return SampleSet(states, model.num_units, seed, "exact")


def _sweep_gibbs(w: np.ndarray, lin, beta: float, s: np.ndarray, u: np.ndarray):
    # Heat-bath update, sequential over units, vectorised over chains.
    # p(s_i = 1 | rest) = sigmoid(beta * (sum_j w_ij s_j + lin_i)).
    for i in range(w.shape[0]):
        field = w[i] @ s
        field += lin[i]
        s[i] = u[i] < expit(beta * field)


def _sweep_metropolis(w: np.ndarray, lin, beta: float, s: np.ndarray, u: np.ndarray):
    # Single-flip Metropolis on an objective to be minimised.
    for i in range(w.shape[0]):
        field = w[i] @ s
        field += lin[i]
        delta = (1.0 - 2.0 * s[i]) * field
        accept = u[i] < np.exp(-beta * np.maximum(delta, 0.0))
        s[i] = np.where(accept, 1.0 - s[i], s[i])


def _run_chains(w: np.ndarray, lin: np.ndarray, betas: np.ndarray, sweep_fn,
                count: int, seed: int) -> np.ndarray:
    """Independent chains in chunks; returns final states (count, n) uint8."""
    n = w.shape[0]
    out = np.empty((count, n), dtype=np.uint8)
    start = 0
    for k, m in enumerate(_chunk_sizes(count)):
        rng = derive_rng(seed, k)
        s = (rng.random((n, m)) < 0.5).astype(np.float64)
        for beta_t in betas:
            u = rng.random((n, m))
            sweep_fn(w, lin, beta_t, s, u)
        out[start:start + m] = s.T
        start += m
    return out


def sample_gibbs(model: EnergyModel, beta: float, sweeps: int, count: int,
                 seed: int) -> SampleSet:
    """Gibbs chains with random starts and a fixed sweep budget per chain."""
    _check_beta(beta)
    _check_count(count)
    if int(sweeps) != sweeps or sweeps < 1:
        raise InputError(f"sweeps must be a positive integer, got {sweeps}")
    betas = np.full(int(sweeps), float(beta))
    states = _run_chains(model.weights, model.biases, betas, _sweep_gibbs,
                         count, seed)
    return SampleSet(states, model.num_units, seed, "gibbs")


def sample_sa(model: EnergyModel, beta_eff: float,
              schedule: AnnealSchedule = DEFAULT_SCHEDULE,
              count: int = 1, seed: int = 0) -> SampleSet:
    """One independent annealing run per sample.

    Each chain starts from a random state and performs Metropolis single-flip
    sweeps on ``to_minimization_objective(model, beta_eff)`` while the
    schedule's inverse temperature rises; the final state is recorded.
    """
    _check_count(count)
    objective = to_minimization_objective(model, beta_eff)
    states = _run_chains(objective.weights, objective.biases, schedule.betas(),
                         _sweep_metropolis, count, seed)
    return SampleSet(states, model.num_units, seed, "sa")


def _grouped_moments(w: np.ndarray, lins: np.ndarray, betas: np.ndarray,
                     sweep_fn, count: int, seeds: Sequence[int]):
    """Chain groups with shared weights and per-group linear terms.

    Group d runs ``count`` chains whose randomness comes from
    ``derive_rng(seeds[d], 0)`` exactly as a solo call with that seed would,
    so grouped and per-datapoint execution agree bit for bit.
    """
    n = w.shape[0]
    b = lins.shape[0]
    if count > _CHAIN_CHUNK:
        raise InputError(f"grouped sampling supports at most {_CHAIN_CHUNK} chains per group")
    if len(seeds) != b:
        raise InputError(f"got {len(seeds)} seeds for {b} groups")
    lin = np.repeat(lins, count, axis=0).T  # (n, b*count)
    rngs = [derive_rng(s, 0) for s in seeds]
    s = np.empty((n, b * count))
    for d, rng in enumerate(rngs):
        s[:, d * count:(d + 1) * count] = rng.random((n, count)) < 0.5
    u = np.empty_like(s)
    for beta_t in betas:
        for d, rng in enumerate(rngs):
            u[:, d * count:(d + 1) * count] = rng.random((n, count))
        sweep_fn(w, lin, beta_t, s, u)
    first = np.empty((b, n))
    second = np.empty((b, n, n))
    for d in range(b):
        block = s[:, d * count:(d + 1) * count]
        first[d] = block.mean(axis=1)
        second[d] = block @ block.T / count
        np.fill_diagonal(second[d], first[d])
    return first, second


class ExactSampler:
    """Categorical draws from the enumerated distribution (n <= 20)."""

    tag: ClassVar[str] = "exact"

    def sample(self, model, beta, count, seed):
        return sample_exact(model, beta, count, seed)

    def moments(self, model, beta, count, seed):
        return estimate_moments(self.sample(model, beta, count, seed))

    def moments_many(self, model, lins, beta, count, seeds):
        first = np.empty((lins.shape[0], model.num_units))
        second = np.empty((lins.shape[0], model.num_units, model.num_units))
        for d, seed in enumerate(seeds):
            m = self.moments(replace(model, biases=lins[d]), beta, count, seed)
            first[d] = m.first
            second[d] = m.second
        return first, second


class EnumerationSampler:
    """Moment oracle: exact enumerated moments, no sampling noise.

    ``count`` and ``seed`` are accepted for interface parity and ignored by
    :meth:`moments`; :meth:`sample` falls back to exact draws.
    """

    tag: ClassVar[str] = "enum"

    def sample(self, model, beta, count, seed):
        return sample_exact(model, beta, count, seed)

    def moments(self, model, beta, count, seed):
        return exact_moments(model, beta)

    def moments_many(self, model, lins, beta, count, seeds):
        first = np.empty((lins.shape[0], model.num_units))
        second = np.empty((lins.shape[0], model.num_units, model.num_units))
        for d in range(lins.shape[0]):
            m = exact_moments(replace(model, biases=lins[d]), beta)
            first[d] = m.first
            second[d] = m.second
        return first, second


@dataclass(frozen=True)
class GibbsSampler:
    """Fixed-budget Gibbs chains."""

    sweeps: int = 100
    tag: ClassVar[str] = "gibbs"

    def sample(self, model, beta, count, seed):
        return sample_gibbs(model, beta, self.sweeps, count, seed)

    def moments(self, model, beta, count, seed):
        return estimate_moments(self.sample(model, beta, count, seed))

    def moments_many(self, model, lins, beta, count, seeds):
        _check_beta(beta)
        betas = np.full(self.sweeps, float(beta))
        return _grouped_moments(model.weights, lins, betas, _sweep_gibbs,
                                count, seeds)


@dataclass(frozen=True)
class SaSampler:
    """Independent annealing runs per sample."""

    schedule: AnnealSchedule = DEFAULT_SCHEDULE
    tag: ClassVar[str] = "sa"

    def sample(self, model, beta, count, seed):
        return sample_sa(model, beta, self.schedule, count, seed)

    def moments(self, model, beta, count, seed):
        return estimate_moments(self.sample(model, beta, count, seed))

    def moments_many(self, model, lins, beta, count, seeds):
        scale = _check_beta(beta, "beta_eff")
        betas = self.schedule.betas()
        return _grouped_moments(-scale * model.weights, -scale * lins, betas,
                                _sweep_metropolis, count, seeds)


def make_sampler(name: str, *, gibbs_sweeps: int = 100,
                 sa_schedule: AnnealSchedule = DEFAULT_SCHEDULE):
    """Backend from its config tag: 'exact', 'gibbs' or 'sa'."""
    if name == "exact":
        return ExactSampler()
    if name == "gibbs":
        return GibbsSampler(sweeps=gibbs_sweeps)
    if name == "sa":
        return SaSampler(schedule=sa_schedule)
    raise InputError(f"unknown sampler {name!r}")
