import warnings

import numpy as np
import pytest
from scipy.special import log_ndtr

from grum.errors import ConditionOneError, DataValidationError, NotIdentifiableError
from grum.gibbs import GibbsConfig
from grum.mcem import (FitConfig, Surrogate, e_step, estimate_log_likelihood, fit_map, m_step,
                       ranked_design, surrogate_q)
from grum.model import (AgentPool, AlternativeSet, NoiseModel, Parameters, Prior, Profile,
                        free_vector, sample_profile)
from grum.synthetic import generate_synthetic, preset


def _plain_profile(orders, m=2):
    return Profile(AlternativeSet.plain(m), AgentPool.plain(len(orders)),
                   tuple(enumerate(orders)))


@pytest.fixture(scope="module")
def synthetic():
    return generate_synthetic(preset("dataset2", n=60, m=4, K=2, L=2, seed=11))


def test_e_step_without_rankings():
    prof = Profile(AlternativeSet.plain(3), AgentPool.plain(2), ())
    assert e_step(prof, Parameters.zeros(3), NoiseModel()) == []


def test_e_step_reflection_symmetry():
    prof = _plain_profile([(0, 1), (1, 0)])
    mo = e_step(prof, Parameters.zeros(2), NoiseModel(), GibbsConfig(n_samples=20_000, seed=2))
    np.testing.assert_allclose(mo[1].s, -mo[0].s, atol=0.03)
    np.testing.assert_allclose(mo[1].s, mo[0].s[::-1], atol=0.03)


def test_e_step_matches_rejection_oracle(rng):
    mu = np.array([0.4, -0.3])
    params = Parameters.normalized(mu, np.zeros((0, 0)))
    prof = _plain_profile([(1, 0)])
    n = 4000
    mo = e_step(prof, params, NoiseModel(), GibbsConfig(n_samples=n, seed=5))[0]
    # normalized parameters shift both means by the same constant
    shift = mu[0]
    u = mu + rng.standard_normal((400_000, 2))
    kept = u[u[:, 1] > u[:, 0]] - shift
    oracle = kept.mean(axis=0)
    # Gibbs draws are autocorrelated; allow three standard errors with a generous ESS
    se = kept.std(axis=0) / np.sqrt(n / 4)
    assert np.all(np.abs(mo.s - oracle) < 3 * se)


def test_m_step_closed_form_without_attributes(rng):
    m, n = 4, 30
    prof = _plain_profile([tuple(rng.permutation(m)) for _ in range(n)], m)
    mo = e_step(prof, Parameters.zeros(m), NoiseModel(), GibbsConfig(n_samples=50, seed=0))
    new = m_step(mo, Parameters.zeros(m), prof, NoiseModel())
    s = np.array([x.s for x in mo])
    expected = s.mean(axis=0) - s.mean(axis=0)[0]
    np.testing.assert_allclose(new.delta, expected, atol=1e-10)


def test_m_step_strong_prior_shrinks_to_zero(synthetic):
    prof, noise = synthetic.profile, synthetic.noise
    mo = e_step(prof, synthetic.truth, noise, GibbsConfig(n_samples=50))
    new = m_step(mo, synthetic.truth, prof, noise, Prior.gaussian(1e12))
    assert np.max(np.abs(free_vector(new))) < 1e-8


def test_m_step_is_stationary(synthetic):
    prof, noise = synthetic.profile, synthetic.noise
    prior = Prior.gaussian(0.5)
    mo = e_step(prof, synthetic.truth, noise, GibbsConfig(n_samples=50))
    new = m_step(mo, Parameters.zeros(prof.m, 2, 2), prof, noise, prior)
    sur = Surrogate.from_moments(mo, prof, noise, prior)
    assert np.linalg.norm(sur.gradient(free_vector(new))) < 1e-8


def test_surrogate_is_quadratic(synthetic, rng):
    prof, noise = synthetic.profile, synthetic.noise
    mo = e_step(prof, synthetic.truth, noise, GibbsConfig(n_samples=30))
    sur = Surrogate.from_moments(mo, prof, noise, Prior.gaussian(1.0))
    d = sur.quad.shape[0]
    h = 1e-3
    hessians = []
    for _ in range(5):
        th = rng.normal(size=d)
        fd = np.empty((d, d))
        for a in range(d):
            for b in range(d):
                ea, eb = h * np.eye(d)[a], h * np.eye(d)[b]
                fd[a, b] = (sur.value(th + ea + eb) - sur.value(th + ea - eb)
                            - sur.value(th - ea + eb) + sur.value(th - ea - eb)) / (4 * h * h)
        hessians.append(fd)
    for fd in hessians:
        np.testing.assert_allclose(fd, hessians[0], atol=1e-4 * np.abs(hessians[0]).max())
    np.testing.assert_allclose(hessians[0], sur.hessian(), rtol=1e-4, atol=1e-3)


def test_surrogate_maximizer_beats_perturbations(synthetic, rng):
    prof, noise = synthetic.profile, synthetic.noise
    mo = e_step(prof, synthetic.truth, noise, GibbsConfig(n_samples=30))
    sur = Surrogate.from_moments(mo, prof, noise, Prior.flat())
    best = sur.newton(np.zeros(sur.quad.shape[0]))
    top = sur.value(best)
    for _ in range(100):
        assert sur.value(best + rng.normal(scale=0.1, size=best.size)) <= top


def test_prior_offsets_surrogate_exactly(synthetic, rng):
    prof, noise = synthetic.profile, synthetic.noise
    mo = e_step(prof, synthetic.truth, noise, GibbsConfig(n_samples=30))
    th = rng.normal(size=free_vector(synthetic.truth).size)
    flat = surrogate_q(th, mo, prof, noise, Prior.flat())
    gauss = surrogate_q(th, mo, prof, noise, Prior.gaussian(1.0))
    assert flat - gauss == pytest.approx(0.5 * th @ th, rel=1e-12)


def test_ghk_matches_exact_pairwise_likelihood():
    params = Parameters.normalized([0.0, 0.8], np.zeros((0, 0)))
    prof = _plain_profile([(0, 1), (1, 0), (1, 0)])
    value, se = estimate_log_likelihood(prof, params, NoiseModel(), n_draws=20_000)
    z = 0.8 / np.sqrt(2)
    exact = log_ndtr(-z) + 2 * log_ndtr(z)
    assert 0 < se < 0.05
    assert abs(value - exact) < 4 * se


def test_ghk_against_monte_carlo(rng):
    p = Parameters.normalized([0.0, 0.5, -0.4], np.zeros((0, 0)))
    order = (1, 0, 2)
    prof = _plain_profile([order], 3)
    value, se = estimate_log_likelihood(prof, p, NoiseModel(), n_draws=20_000)
    u = p.delta + rng.standard_normal((400_000, 3))
    freq = np.mean((u[:, 1] > u[:, 0]) & (u[:, 0] > u[:, 2]))
    assert abs(np.exp(value) - freq) < 0.005


def test_symmetric_data_give_zero_difference():
    prof = _plain_profile([(0, 1), (1, 0)] * 20)
    res = fit_map(prof, Prior.flat(), NoiseModel(), FitConfig(max_iters=20))
    assert abs(res.theta_hat.delta[1]) < 0.1


def test_flat_prior_condition_one_violation():
    prof = _plain_profile([(0, 1, 2), (1, 0, 2), (0, 1, 2)], 3)
    with pytest.raises(ConditionOneError) as info:
        fit_map(prof, Prior.flat())
    c1, c2 = info.value.witness
    assert c1 == {2}


def test_proper_prior_warns_but_fits():
    prof = _plain_profile([(0, 1, 2), (1, 0, 2), (0, 1, 2)], 3)
    with pytest.warns(RuntimeWarning):
        res = fit_map(prof, Prior.gaussian(1.0), config=FitConfig(max_iters=5))
    assert np.all(np.isfinite(res.theta))


def test_flat_prior_unidentifiable_design(rng):
    z = rng.normal(size=(3, 1))
    alts = AlternativeSet(np.hstack([z, z]))
    agents = AgentPool(rng.normal(size=(20, 1)))
    prof = sample_profile(Parameters.zeros(3, 1, 2), alts, agents, NoiseModel(), 0)
    with pytest.raises(NotIdentifiableError):
        fit_map(prof, Prior.flat())


def test_empty_profile_rejected():
    with pytest.raises(DataValidationError):
        fit_map(Profile(AlternativeSet.plain(2), AgentPool.plain(1), ()))


def test_fit_is_reproducible(synthetic):
    cfg = FitConfig(max_iters=3, seed=4)
    a = fit_map(synthetic.profile, Prior.gaussian(1.0), synthetic.noise, cfg)
    b = fit_map(synthetic.profile, Prior.gaussian(1.0), synthetic.noise, cfg)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert len(a.trace) == 3 and a.trace[-1].q_after >= a.trace[-1].q_before


def test_ranked_design_shape(synthetic):
    assert ranked_design(synthetic.profile).shape == (60, 4, 3 + 4)
