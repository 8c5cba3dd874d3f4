import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grum.evaluation import (beats_matrix, brute_force_rank_prob, check_condition1,
                             check_identifiability, condition1_exhaustive, diagnose, kendall_tau,
                             pairwise_probit, personalized_ranking, social_ranking)
from grum.model import AgentPool, AlternativeSet, NoiseModel, Parameters, Profile


def test_kendall_identity_and_reversal():
    assert kendall_tau((0, 1, 2, 3), (0, 1, 2, 3)) == 1.0
    assert kendall_tau((0, 1, 2, 3), (3, 2, 1, 0)) == -1.0


def test_kendall_one_swap():
    assert kendall_tau((0, 1, 2), (1, 0, 2)) == pytest.approx(1 / 3)


@settings(max_examples=100, deadline=None)
@given(st.permutations(range(6)), st.permutations(range(6)))
def test_kendall_matches_pair_count(a, b):
    pa = {c: k for k, c in enumerate(a)}
    pb = {c: k for k, c in enumerate(b)}
    s = sum(np.sign(pa[i] - pa[j]) * np.sign(pb[i] - pb[j])
            for i, j in itertools.combinations(range(6), 2))
    assert kendall_tau(a, b) == pytest.approx(s / 15)
    assert kendall_tau(a, b) == kendall_tau(b, a)


def test_social_ranking_sorts_by_delta():
    p = Parameters.normalized([0.5, 2.0, 1.0], np.zeros((0, 0)))
    assert social_ranking(p) == (1, 2, 0)
    assert social_ranking(Parameters.zeros(4)) == (0, 1, 2, 3)
    shifted = Parameters.normalized(np.array([0.5, 2.0, 1.0]) + 7, np.zeros((0, 0)))
    assert social_ranking(shifted) == (1, 2, 0)


def test_personalized_ranking():
    alts = AlternativeSet(np.array([[1.0], [-1.0]]))
    p = Parameters(np.zeros(2), np.array([[1.0]]))
    assert personalized_ranking(p, [2.0], alts) == (0, 1)
    assert personalized_ranking(p, [-2.0], alts) == (1, 0)


def test_personalized_reduces_to_social_without_interaction(rng):
    alts = AlternativeSet(rng.normal(size=(5, 2)))
    p = Parameters.normalized(rng.normal(size=5), np.zeros((3, 2)))
    assert personalized_ranking(p, rng.normal(size=3), alts) == social_ranking(p)


def test_personalized_invariant_to_positive_scaling(rng):
    alts = AlternativeSet(rng.normal(size=(5, 2)))
    p = Parameters(np.zeros(5), rng.normal(size=(2, 2)))
    x = rng.normal(size=2)
    assert personalized_ranking(p, x, alts) == personalized_ranking(p, 3.7 * x, alts)


def test_condition1_mutual_edges():
    assert check_condition1([(0, 1), (1, 0)])[0]


def test_condition1_witness():
    ok, (c1, c2) = check_condition1([(0, 1, 2), (0, 2, 1)])
    assert not ok
    assert c1 == {1, 2} and c2 == {0}


def _random_orders(rng, m, n):
    base = rng.permutation(m)
    # mostly copies of a base order so that violations are common
    out = []
    for _ in range(n):
        order = base.copy()
        if rng.random() < 0.5:
            i, j = rng.choice(m, 2, replace=False)
            order[[i, j]] = order[[j, i]]
        out.append(tuple(int(v) for v in order))
    return out


def test_condition1_agrees_with_enumeration(rng):
    for _ in range(100):
        m = int(rng.integers(2, 7))
        orders = _random_orders(rng, m, int(rng.integers(1, 6)))
        ok, witness = check_condition1(orders, m)
        assert ok == condition1_exhaustive(orders, m)[0]
        if not ok:
            c1, c2 = witness
            beats = beats_matrix(orders, m)
            assert c1 | c2 == set(range(m)) and not c1 & c2
            assert not beats[np.ix_(sorted(c1), sorted(c2))].any()


def test_identifiable_without_attributes():
    ok, rank = check_identifiability(AgentPool.plain(1), AlternativeSet.plain(4))
    assert ok and rank == 3


def test_duplicated_alternative_column_is_not_identifiable(rng):
    z = rng.normal(size=(5, 1))
    ok, rank = check_identifiability(AgentPool(rng.normal(size=(50, 2))),
                                     AlternativeSet(np.hstack([z, z])))
    assert not ok and rank < 4 + 4


def test_constant_column_with_identical_agents_is_not_identifiable(rng):
    x = np.tile(rng.normal(size=(1, 2)), (30, 1))
    z = np.hstack([np.ones((5, 1)), rng.normal(size=(5, 1))])
    ok, _ = check_identifiability(AgentPool(x), AlternativeSet(z))
    assert not ok


def test_generic_design_is_identifiable(rng):
    ok, rank = check_identifiability(AgentPool(rng.normal(size=(30, 2))),
                                     AlternativeSet(rng.normal(size=(5, 2))))
    assert ok and rank == 8


def test_diagnose(rng):
    alts = AlternativeSet(rng.normal(size=(3, 1)))
    agents = AgentPool(rng.normal(size=(3, 1)))
    prof = Profile(alts, agents, ((0, (0, 1, 2)), (1, (0, 2, 1))))
    report = diagnose(prof)
    assert not report.condition1_ok and not report.ok
    assert report.d == 3


def test_brute_force_uniform_under_equal_means():
    n = 60_000
    probs = brute_force_rank_prob(Parameters.zeros(3), np.zeros(0), AlternativeSet.plain(3),
                                  NoiseModel(1.0), n_mc=n, seed=0)
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)
    se = math.sqrt((1 / 6) * (5 / 6) / n)
    for p in probs.values():
        assert abs(p - 1 / 6) < 3 * se


def test_brute_force_matches_probit_formula():
    p = Parameters.normalized([1.0, 0.0], np.zeros((0, 0)))
    probs = brute_force_rank_prob(p, np.zeros(0), AlternativeSet.plain(2), NoiseModel(1.0),
                                  n_mc=100_000, seed=1)
    exact = pairwise_probit(1.0, 0.0, 1.0)
    assert exact == pytest.approx(0.7602, abs=1e-4)
    assert abs(probs[(0, 1)] - exact) < 0.01
