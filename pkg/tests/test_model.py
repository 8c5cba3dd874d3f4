import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from grum.errors import DataValidationError
from grum.model import (AgentPool, AlternativeSet, NoiseModel, Parameters, Prior, Profile,
                        embed_vector, free_dimension, free_vector, log_prior, mean_jacobian,
                        mean_utilities, rank_by_utility, sample_profile)


def test_free_vector_delta_only():
    np.testing.assert_array_equal(free_vector(Parameters(np.array([0.0, 1.5]), np.zeros((0, 0)))),
                                  [1.5])


def test_free_vector_with_interaction():
    p = Parameters(np.array([0.0, 2.0]), np.array([[3.0]]))
    np.testing.assert_array_equal(free_vector(p), [2.0, 3.0])


@settings(max_examples=100, deadline=None)
@given(m=st.integers(2, 6), K=st.integers(0, 3), L=st.integers(0, 3), seed=st.integers(0, 2**31))
def test_embed_free_round_trip(m, K, L, seed):
    rng = np.random.default_rng(seed)
    p = Parameters.normalized(rng.normal(size=m), rng.normal(size=(K, L)))
    assert embed_vector(free_vector(p), m, K, L) == p
    assert free_vector(p).size == free_dimension(m, K, L)


def test_parameters_require_pinned_first_delta():
    with pytest.raises(DataValidationError):
        Parameters(np.array([1.0, 2.0]), np.zeros((0, 0)))
    p = Parameters.normalized([1.0, 2.0], np.zeros((0, 0)))
    np.testing.assert_allclose(p.delta, [0.0, 1.0])


def test_zero_interaction_gives_intrinsic_utilities(rng):
    alts = AlternativeSet(rng.normal(size=(4, 2)))
    agents = AgentPool(rng.normal(size=(6, 3)))
    p = Parameters.normalized(rng.normal(size=4), np.zeros((3, 2)))
    mu = mean_utilities(p, alts, agents)
    np.testing.assert_allclose(mu, np.tile(p.delta, (6, 1)))


def test_mean_utilities_arithmetic():
    p = Parameters(np.zeros(2), np.array([[2.0]]))
    mu = mean_utilities(p, AlternativeSet(np.array([[1.0], [-1.0]])), AgentPool(np.array([[3.0]])))
    np.testing.assert_allclose(mu, [[6.0, -6.0]])


def test_jacobian_matches_finite_differences(rng):
    m, K, L = 4, 2, 3
    alts = AlternativeSet(rng.normal(size=(m, L)))
    agents = AgentPool(rng.normal(size=(5, K)))
    theta = rng.normal(size=free_dimension(m, K, L))
    A = mean_jacobian(agents.x, alts.z)

    def mu(th):
        return mean_utilities(embed_vector(th, m, K, L), alts, agents)

    h = 1e-6
    fd = np.stack([(mu(theta + h * e) - mu(theta - h * e)) / (2 * h)
                   for e in np.eye(theta.size)], axis=-1)
    np.testing.assert_allclose(fd, A, atol=1e-6)
    np.testing.assert_allclose(A @ theta, mu(theta), atol=1e-12)


def test_rank_by_utility_ties_prefer_lower_index():
    np.testing.assert_array_equal(rank_by_utility(np.array([1.0, 1.0, 2.0])), [2, 0, 1])


def test_sample_profile_is_deterministic(small_model):
    params, alts, agents, noise = small_model
    assert sample_profile(params, alts, agents, noise, 3) == sample_profile(params, alts, agents,
                                                                            noise, 3)


def test_dominant_means_fix_the_ranking():
    p = Parameters.normalized([100.0, 0.0, -100.0], np.zeros((0, 0)))
    prof = sample_profile(p, AlternativeSet.plain(3), AgentPool.plain(1000), NoiseModel(1.0), 0)
    hits = sum(order == (0, 1, 2) for _, order in prof.rankings)
    assert hits >= 999


def test_null_model_rankings_are_uniform():
    prof = sample_profile(Parameters.zeros(3), AlternativeSet.plain(3), AgentPool.plain(60_000),
                          NoiseModel(1.0), 1)
    codes = prof.orders @ np.array([9, 3, 1])
    _, counts = np.unique(codes, return_counts=True)
    assert counts.size == 6
    assert stats.chisquare(counts).pvalue > 0.01


def test_profile_validation():
    alts, agents = AlternativeSet.plain(3), AgentPool.plain(2)
    with pytest.raises(DataValidationError):
        Profile(alts, agents, ((0, (0, 1, 1)),))
    with pytest.raises(DataValidationError):
        Profile(alts, agents, ((0, (0, 1, 2)), (0, (2, 1, 0))))
    with pytest.raises(DataValidationError):
        Profile(alts, agents, ((5, (0, 1, 2)),))
    prof = Profile(alts, agents, ((1, (2, 0, 1)),))
    assert prof.ranking_of(1) == (2, 0, 1)
    assert prof.restricted_to([]).n_rankings == 0


def test_flat_prior_is_zero(rng):
    theta = rng.normal(size=4)
    value, grad, _ = log_prior(theta, Prior.flat())
    assert value == 0.0
    np.testing.assert_array_equal(grad, 0.0)


def test_gaussian_prior_mode():
    _, grad, hess = log_prior(np.zeros(3), Prior.gaussian(1.0))
    np.testing.assert_array_equal(grad, 0.0)
    np.testing.assert_array_equal(hess, -np.eye(3))


def test_prior_gradient_matches_finite_differences(rng):
    prior = Prior.gaussian(2.5)
    h = 1e-6
    for _ in range(10):
        theta = rng.normal(size=5)
        _, grad, _ = log_prior(theta, prior)
        fd = [(log_prior(theta + h * e, prior)[0] - log_prior(theta - h * e, prior)[0]) / (2 * h)
              for e in np.eye(5)]
        np.testing.assert_allclose(fd, grad, atol=1e-6)


def test_noise_natural_parameter():
    noise = NoiseModel(0.5)
    assert noise.variance == 0.25
    np.testing.assert_allclose(noise.natural_parameter(np.array([1.0])), [4.0])
    with pytest.raises(Exception):
        NoiseModel(0.0)
