"""Ranking metrics, well-posedness diagnostics and brute-force oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DataValidationError
from .model import AgentPool, free_dimension, mean_jacobian, mean_utilities, rank_by_utility
from .seeding import rng_for

RANK_TOL = 1e-8


def kendall_tau(a, b):
    """Kendall correlation between two strict rankings of the same alternatives."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError(f"rankings have different lengths: {a.size} and {b.size}")
    m = a.size
    if m < 2:
        return 1.0
    pos_a = np.empty(m, dtype=np.int64)
    pos_b = np.empty(m, dtype=np.int64)
    pos_a[a] = np.arange(m)
    pos_b[b] = np.arange(m)
    da = np.sign(pos_a[:, None] - pos_a[None, :])
    db = np.sign(pos_b[:, None] - pos_b[None, :])
    # every unordered pair appears twice in the full matrix
    agree = np.sum(da * db) / 2
    return float(agree / (m * (m - 1) / 2))


def social_ranking(params):
    """Alternatives ordered by intrinsic utility, best first."""
    return tuple(int(j) for j in rank_by_utility(params.delta))


def personalized_ranking(params, x, alternatives):
    """Alternatives ordered by ``delta_j + x B z_j^T`` for one agent."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != params.K or alternatives.L != params.L or alternatives.m != params.m:
        raise DataValidationError(
            f"dimension mismatch: x has {x.size} entries, B is {params.K}x{params.L}, "
            f"alternatives are {alternatives.m}x{alternatives.L}"
        )
    mu = params.delta + x @ params.b @ alternatives.z.T
    return tuple(int(j) for j in rank_by_utility(mu))


def beats_matrix(orders, m):
    """Boolean matrix with ``[a, b]`` true iff some ranking puts ``a`` above ``b``."""
    beats = np.zeros((m, m), dtype=bool)
    for order in orders:
        order = list(order)
        for k, a in enumerate(order):
            beats[a, order[k + 1:]] = True
    return beats


def _orders_of(profile_or_orders, m=None):
    if hasattr(profile_or_orders, "rankings"):
        return [o for _, o in profile_or_orders.rankings], profile_or_orders.m
    orders = [tuple(o) for o in profile_or_orders]
    if m is None:
        m = len(orders[0]) if orders else 0
    return orders, m


def check_condition1(profile, m=None):
    """Whether every bipartition of the alternatives is crossed in both directions.

    Equivalent to strong connectivity of the beats-graph.  Returns
    ``(ok, witness)``; on failure ``witness = (C1, C2)`` is a partition such
    that no alternative of ``C1`` is ever ranked above one of ``C2``.
    """
    orders, m = _orders_of(profile, m)
    if not orders:
        raise DataValidationError("Condition 1 needs at least one ranking")
    beats = beats_matrix(orders, m)
    n_comp, labels = connected_components(beats, directed=True, connection="strong")
    if n_comp == 1:
        return True, None
    # A source component of the condensation receives no edge from outside.
    incoming = np.zeros(n_comp, dtype=bool)
    src, dst = np.nonzero(beats)
    for a, b in zip(src, dst):
        if labels[a] != labels[b]:
            incoming[labels[b]] = True
    source = int(np.flatnonzero(~incoming)[0])
    c2 = frozenset(int(j) for j in np.flatnonzero(labels == source))
    c1 = frozenset(range(m)) - c2
    return False, (c1, c2)


def condition1_exhaustive(profile, m=None):
    """Brute-force check of Condition 1 over every ordered bipartition (test oracle)."""
    orders, m = _orders_of(profile, m)
    beats = beats_matrix(orders, m)
    for mask in range(1, 2 ** m - 1):
        c1 = [j for j in range(m) if mask >> j & 1]
        c2 = [j for j in range(m) if not mask >> j & 1]
        if not beats[np.ix_(c1, c2)].any():
            return False, (frozenset(c1), frozenset(c2))
    return True, None


def identifiability_design(agents, alternatives):
    """Map from the free vector to within-agent utility differences ``mu_ij - mu_i0``.

    Rankings are invariant to an agent-specific shift of all utilities, so
    only these differences are estimable.
    """
    A = mean_jacobian(agents.x, alternatives.z)
    diff = A[:, 1:, :] - A[:, :1, :]
    return diff.reshape(-1, A.shape[2])


def check_identifiability(agents, alternatives):
    """Return ``(identifiable, rank)`` of the difference design."""
    d = free_dimension(alternatives.m, agents.K, alternatives.L)
    if d == 0:
        return True, 0
    design = identifiability_design(agents, alternatives)
    if design.shape[0] == 0:
        return False, 0
    sv = np.linalg.svd(design, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv[0] > 0 else 0
    return rank == d, rank


@dataclass(frozen=True)
class DiagnosticsReport:
    condition1_ok: bool
    witness_partition: tuple | None
    identifiable: bool
    design_rank: int
    d: int

    @property
    def ok(self):
        return self.condition1_ok and self.identifiable


def diagnose(profile):
    """Condition 1 on the rankings and identifiability over the ranked agents."""
    ok, witness = check_condition1(profile)
    agents = profile.agents
    ranked = profile.ranked_agents
    sub = AgentPool(agents.x[ranked])
    identifiable, rank = check_identifiability(sub, profile.alternatives)
    d = free_dimension(profile.m, agents.K, profile.alternatives.L)
    return DiagnosticsReport(ok, witness, identifiable, rank, d)


def brute_force_rank_prob(params, x, alternatives, noise, n_mc=100_000, seed=0):
    """Monte-Carlo frequency of every ranking for an agent with attributes ``x``.

    Returns a dict from ranking tuples to probabilities; all ``m!`` rankings
    are present, including those never observed.
    """
    m = alternatives.m
    if m > 5:
        raise ValueError(f"enumeration needs m <= 5, got {m}")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    mu = mean_utilities(params, alternatives, AgentPool(x))[0]
    rng = rng_for(seed, "brute-force")
    u = mu + noise.sigma * rng.standard_normal((int(n_mc), m))
    orders = rank_by_utility(u)
    weights = m ** np.arange(m - 1, -1, -1)
    codes = orders @ weights
    uniq, counts = np.unique(codes, return_counts=True)
    freq = dict(zip(uniq.tolist(), (counts / n_mc).tolist()))
    return {
        perm: freq.get(int(np.dot(perm, weights)), 0.0)
        for perm in itertools.permutations(range(m))
    }


def pairwise_probit(mu_a, mu_b, sigma):
    """``Pr(a above b)`` for two normal utilities with common noise scale."""
    return 0.5 * math.erfc(-(mu_a - mu_b) / (sigma * 2.0))
