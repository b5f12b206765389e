import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_dense_model, state_indices, tv_distance
from qbm.energy import EnergyModel, all_states, clamp, energy
from qbm.errors import InputError
from qbm.samplers import (AnnealSchedule, DEFAULT_SCHEDULE, EnumerationSampler,
                          ExactSampler, GibbsSampler, Moments, SampleSet,
                          SaSampler, enumerate_distribution, estimate_moments,
                          exact_moments, make_sampler, sample_exact,
                          sample_gibbs, sample_sa)


def test_enumeration_two_unit_handcomputed():
    # index order 00, 10, 01, 11 with unit 0 as the least significant bit
    m = EnergyModel.from_couplings(2, {(0, 1): 1.0})
    p = enumerate_distribution(m, 1.0)
    expect = np.array([1.0, 1.0, 1.0, np.e]) / (3.0 + np.e)
    assert np.allclose(p, expect, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_enumeration_normalises(seed, n):
    p = enumerate_distribution(random_dense_model(n, seed), 0.7)
    assert p.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(p >= 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6), st.data())
def test_conditioning_commutes_with_clamp(seed, n, data):
    """Enumerating the clamped reduction equals conditioning the full
    enumeration on the pinned values."""
    m = random_dense_model(n, seed)
    pinned = data.draw(st.integers(0, n - 1))
    value = data.draw(st.integers(0, 1))
    cm = clamp(m, {pinned: value})
    p_red = enumerate_distribution(cm.reduced, 1.1)
    p_full = enumerate_distribution(m, 1.1)
    full_states = all_states(n)
    keep = full_states[:, pinned] == value
    conditioned = p_full[keep] / p_full[keep].sum()
    # rows of all_states with one unit pinned enumerate the free pattern in
    # the same index order, so the slices line up directly
    assert np.allclose(p_red, conditioned, atol=1e-10)


def test_exact_sampler_two_unit_frequency():
    m = EnergyModel.from_couplings(2, {(0, 1): 1.0})
    draws = sample_exact(m, 1.0, 100_000, 424242)
    freq = np.mean(np.all(draws.states == 1, axis=1))
    assert freq == pytest.approx(np.e / (3 + np.e), abs=0.01)


def test_exact_sampler_deterministic_and_seed_sensitive():
    m = random_dense_model(5, 8)
    a = sample_exact(m, 1.0, 5000, 1)
    b = sample_exact(m, 1.0, 5000, 1)
    c = sample_exact(m, 1.0, 5000, 2)
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.states, c.states)
    assert a.backend_tag == "exact" and a.count == 5000


def test_exact_sampler_tv_shrinks_with_count():
    m = random_dense_model(6, 21)
    p = enumerate_distribution(m, 1.0)
    medians = []
    for count in (1_000, 10_000, 100_000):
        tvs = [tv_distance(p, sample_exact(m, 1.0, count, s).states)
               for s in range(5)]
        medians.append(np.median(tvs))
    assert medians[1] < 0.6 * medians[0]
    assert medians[2] < 0.6 * medians[1]


def test_gibbs_sweep_ladder_reduces_tv():
    m = random_dense_model(7, 3)
    p = enumerate_distribution(m, 1.2)
    medians = []
    for sweeps in (1, 4, 16, 64):
        tvs = [tv_distance(p, sample_gibbs(m, 1.2, sweeps, 20_000, s).states)
               for s in range(5)]
        medians.append(float(np.median(tvs)))
    assert medians[0] > medians[1] + 0.03  # one sweep is visibly unmixed
    for earlier, later in zip(medians[1:], medians[2:]):
        assert later <= earlier + 0.003


def test_gibbs_matches_enumeration():
    m = random_dense_model(8, 17)
    p = enumerate_distribution(m, 1.0)
    draws = sample_gibbs(m, 1.0, 200, 20_000, 5)
    assert tv_distance(p, draws.states) < 0.05


def test_sa_matches_enumeration():
    m = random_dense_model(8, 29)
    p = enumerate_distribution(m, 1.0)
    draws = sample_sa(m, 1.0, DEFAULT_SCHEDULE, 20_000, 5)
    assert tv_distance(p, draws.states) < 0.08
    assert draws.backend_tag == "sa"


def test_chain_samplers_deterministic_across_chunks():
    """Counts above the chunk width still reproduce bit for bit."""
    m = random_dense_model(4, 2)
    big = 8192 + 37
    a = sample_gibbs(m, 1.0, 3, big, 9)
    b = sample_gibbs(m, 1.0, 3, big, 9)
    assert np.array_equal(a.states, b.states)
    sa_a = sample_sa(m, 1.0, AnnealSchedule(sweeps=5), big, 9)
    sa_b = sample_sa(m, 1.0, AnnealSchedule(sweeps=5), big, 9)
    assert np.array_equal(sa_a.states, sa_b.states)


def test_grouped_moments_match_solo_calls():
    """moments_many with per-group seeds reproduces the solo sampler calls."""
    n = 6
    base = random_dense_model(n, 5)
    template = EnergyModel(base.weights, np.zeros(n), base.edge_mask)
    lins = np.stack([base.biases, 0.5 * base.biases, -base.biases])
    seeds = [11, 22, 33]
    for sampler, solo in (
        (GibbsSampler(sweeps=25),
         lambda lin, s: estimate_moments(sample_gibbs(
             EnergyModel(base.weights, lin, base.edge_mask), 1.3, 25, 40, s))),
        (SaSampler(AnnealSchedule(sweeps=30)),
         lambda lin, s: estimate_moments(sample_sa(
             EnergyModel(base.weights, lin, base.edge_mask), 1.3,
             AnnealSchedule(sweeps=30), 40, s))),
        (ExactSampler(),
         lambda lin, s: estimate_moments(sample_exact(
             EnergyModel(base.weights, lin, base.edge_mask), 1.3, 40, s))),
    ):
        first, second = sampler.moments_many(template, lins, 1.3, 40, seeds)
        for d in range(3):
            ref = solo(lins[d], seeds[d])
            assert np.array_equal(first[d], ref.first), sampler.tag
            assert np.allclose(second[d], ref.second, atol=1e-12), sampler.tag


def test_exact_moments_against_straight_line_oracle():
    m = random_dense_model(4, 31)
    beta = 0.9
    # independent computation: explicit loops over all 16 states
    weights = np.zeros(16)
    for k in range(16):
        s = [(k >> i) & 1 for i in range(4)]
        weights[k] = np.exp(beta * energy(m, s))
    probs = weights / weights.sum()
    first = np.zeros(4)
    second = np.zeros((4, 4))
    for k in range(16):
        s = np.array([(k >> i) & 1 for i in range(4)], dtype=float)
        first += probs[k] * s
        second += probs[k] * np.outer(s, s)
    np.fill_diagonal(second, first)
    mom = exact_moments(m, beta)
    assert np.allclose(mom.first, first, atol=1e-10)
    assert np.allclose(mom.second, second, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_estimated_moment_invariants(seed):
    m = random_dense_model(5, seed % 17)
    mom = estimate_moments(sample_exact(m, 1.0, 500, seed))
    assert np.allclose(np.diag(mom.second), mom.first, atol=1e-15)
    assert np.allclose(mom.second, mom.second.T, atol=1e-15)
    bound = np.minimum.outer(mom.first, mom.first)
    assert np.all(mom.second <= bound + 1e-12)


def test_sample_set_validation():
    with pytest.raises(InputError):
        SampleSet(np.empty((0, 3)), 3, 0, "exact")
    with pytest.raises(InputError):
        SampleSet(np.zeros((4, 3)), 5, 0, "exact")
    with pytest.raises(InputError):
        SampleSet(np.full((2, 2), 2), 2, 0, "exact")


def test_moments_validation():
    with pytest.raises(InputError):
        Moments(np.zeros(3), np.zeros((2, 2)))


def test_schedule_validation_and_endpoints():
    sched = AnnealSchedule(sweeps=100, beta_start=0.1, beta_end=1.0)
    betas = sched.betas()
    assert betas[0] == pytest.approx(0.1, abs=1e-15)
    assert betas[-1] == pytest.approx(1.0, abs=1e-15)
    assert betas.size == 100
    linear = AnnealSchedule(sweeps=5, interpolation="linear").betas()
    assert np.allclose(np.diff(linear), np.diff(linear)[0])
    with pytest.raises(InputError):
        AnnealSchedule(sweeps=0)
    with pytest.raises(InputError):
        AnnealSchedule(beta_start=0.0)
    with pytest.raises(InputError):
        AnnealSchedule(beta_start=2.0, beta_end=1.0)
    with pytest.raises(InputError):
        AnnealSchedule(interpolation="cubic")


def test_sampler_parameter_validation():
    m = random_dense_model(3, 0)
    with pytest.raises(InputError):
        sample_gibbs(m, -1.0, 5, 10, 0)
    with pytest.raises(InputError):
        sample_gibbs(m, 1.0, 0, 10, 0)
    with pytest.raises(InputError):
        sample_gibbs(m, 1.0, 5, 0, 0)
    with pytest.raises(InputError):
        sample_exact(m, 1.0, -3, 0)


def test_make_sampler():
    assert make_sampler("exact").tag == "exact"
    assert make_sampler("gibbs", gibbs_sweeps=7).sweeps == 7
    assert make_sampler("sa").schedule == DEFAULT_SCHEDULE
    with pytest.raises(InputError):
        make_sampler("tempering")


def test_enumeration_sampler_is_noise_free():
    m = random_dense_model(5, 40)
    mom = EnumerationSampler().moments(m, 1.0, 3, 123)
    ref = exact_moments(m, 1.0)
    assert np.array_equal(mom.first, ref.first)
    assert np.array_equal(mom.second, ref.second)
